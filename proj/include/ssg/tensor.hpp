#pragma once

#include <cstddef>
#include <initializer_list>
#include <string>
#include <vector>

namespace ssg {

using Shape = std::vector<int>;

// Dense row-major f64 tensor. The single numeric currency of the library:
// rank 0..3 in practice (scalars, vectors, matrices, score volumes).
struct Tensor {
    Shape shape;
    std::vector<double> data;

    Tensor() = default;
    explicit Tensor(Shape s);
    Tensor(Shape s, std::vector<double> d);
    Tensor(Shape s, double fill);

    static Tensor scalar(double v);
    static Tensor vec(std::initializer_list<double> v);
    static Tensor vec(std::vector<double> v);
    // rows*cols values in row-major order
    static Tensor mat(int rows, int cols, std::vector<double> v);
    static Tensor zeros(Shape s) { return Tensor(std::move(s), 0.0); }
    static Tensor identity(int n);

    int rank() const { return static_cast<int>(shape.size()); }
    std::size_t numel() const { return data.size(); }
    int dim(int i) const { return shape[static_cast<std::size_t>(i)]; }
    int rows() const { return shape.at(0); }
    int cols() const { return shape.at(1); }

    double& at(int i) { return data[static_cast<std::size_t>(i)]; }
    double at(int i) const { return data[static_cast<std::size_t>(i)]; }
    double& at(int i, int j);
    double at(int i, int j) const;
    double& at(int i, int j, int k);
    double at(int i, int j, int k) const;

    double item() const; // requires numel()==1

    bool same_shape(const Tensor& o) const { return shape == o.shape; }
    bool all_finite() const;

    std::string shape_str() const;
};

std::size_t shape_numel(const Shape& s);

} // namespace ssg
