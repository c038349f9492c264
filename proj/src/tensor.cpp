#include "ssg/tensor.hpp"

#include <cmath>
#include <sstream>
#include <stdexcept>

namespace ssg {

std::size_t shape_numel(const Shape& s) {
    std::size_t n = 1;
    for (int d : s) {
        if (d < 0) throw std::invalid_argument("negative dimension in shape");
        n *= static_cast<std::size_t>(d);
    }
    return n;
}

Tensor::Tensor(Shape s) : shape(std::move(s)), data(shape_numel(shape), 0.0) {}

Tensor::Tensor(Shape s, std::vector<double> d) : shape(std::move(s)), data(std::move(d)) {
    if (data.size() != shape_numel(shape)) {
        throw std::invalid_argument("tensor data size does not match shape " + shape_str());
    }
}

Tensor::Tensor(Shape s, double fill) : shape(std::move(s)), data(shape_numel(shape), fill) {}

Tensor Tensor::scalar(double v) { return Tensor({}, std::vector<double>{v}); }

Tensor Tensor::vec(std::initializer_list<double> v) {
    std::vector<double> d(v);
    const int n = static_cast<int>(d.size());
    return Tensor({n}, std::move(d));
}

Tensor Tensor::vec(std::vector<double> v) {
    int n = static_cast<int>(v.size());
    return Tensor({n}, std::move(v));
}

Tensor Tensor::mat(int rows, int cols, std::vector<double> v) {
    return Tensor({rows, cols}, std::move(v));
}

Tensor Tensor::identity(int n) {
    Tensor t({n, n}, 0.0);
    for (int i = 0; i < n; ++i) t.at(i, i) = 1.0;
    return t;
}

double& Tensor::at(int i, int j) {
    return data[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(j)];
}

double Tensor::at(int i, int j) const {
    return data[static_cast<std::size_t>(i) * static_cast<std::size_t>(cols()) + static_cast<std::size_t>(j)];
}

double& Tensor::at(int i, int j, int k) {
    const std::size_t d1 = static_cast<std::size_t>(shape[1]);
    const std::size_t d2 = static_cast<std::size_t>(shape[2]);
    return data[(static_cast<std::size_t>(i) * d1 + static_cast<std::size_t>(j)) * d2 + static_cast<std::size_t>(k)];
}

double Tensor::at(int i, int j, int k) const {
    const std::size_t d1 = static_cast<std::size_t>(shape[1]);
    const std::size_t d2 = static_cast<std::size_t>(shape[2]);
    return data[(static_cast<std::size_t>(i) * d1 + static_cast<std::size_t>(j)) * d2 + static_cast<std::size_t>(k)];
}

double Tensor::item() const {
    if (data.size() != 1) throw std::logic_error("item() on tensor with numel != 1");
    return data[0];
}

bool Tensor::all_finite() const {
    for (double v : data) {
        if (!std::isfinite(v)) return false;
    }
    return true;
}

std::string Tensor::shape_str() const {
    std::ostringstream os;
    os << '[';
    for (std::size_t i = 0; i < shape.size(); ++i) {
        if (i) os << 'x';
        os << shape[i];
    }
    os << ']';
    return os.str();
}

} // namespace ssg
