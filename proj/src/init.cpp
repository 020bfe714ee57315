#include "dsdr/init.hpp"

#include <Eigen/QR>
#include <stdexcept>

namespace dsdr {

ConvFilter orthogonal_init(Shape shape, double gain, Rng& rng) {
    if (shape.n <= 0 || shape.c <= 0 || shape.h <= 0 || shape.w <= 0) {
        throw std::invalid_argument("orthogonal_init: non-positive dimension in " + to_string(shape));
    }
    const Eigen::Index rows = shape.n;
    const Eigen::Index cols = static_cast<Eigen::Index>(shape.c) * shape.h * shape.w;
    const bool transpose = rows < cols;
    const Eigen::Index tall = transpose ? cols : rows;
    const Eigen::Index narrow = transpose ? rows : cols;

    std::normal_distribution<double> normal(0.0, 1.0);
    Eigen::MatrixXd sample(tall, narrow);
    for (Eigen::Index i = 0; i < tall; ++i)
        for (Eigen::Index j = 0; j < narrow; ++j) sample(i, j) = normal(rng);

    Eigen::HouseholderQR<Eigen::MatrixXd> qr(sample);
    Eigen::MatrixXd q = qr.householderQ() * Eigen::MatrixXd::Identity(tall, narrow);
    const Eigen::MatrixXd r = qr.matrixQR().topRows(narrow).triangularView<Eigen::Upper>();
    // Sign fix makes the factorisation unique, so the result is Haar-distributed.
    for (Eigen::Index j = 0; j < narrow; ++j) {
        if (r(j, j) < 0.0) q.col(j) = -q.col(j);
    }
    if (transpose) q.transposeInPlace();

    ConvFilter f = ConvFilter::zeros(shape.n, shape.c, shape.h);
    float* w = f.weights.data();
    for (Eigen::Index i = 0; i < rows; ++i)
        for (Eigen::Index j = 0; j < cols; ++j) w[i * cols + j] = static_cast<float>(gain * q(i, j));
    return f;
}

}  // namespace dsdr
