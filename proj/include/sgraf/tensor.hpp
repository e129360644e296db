#ifndef SGRAF_TENSOR_HPP_
#define SGRAF_TENSOR_HPP_

#include <cstddef>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace sgraf {

using Shape = std::vector<std::size_t>;

struct ShapeError : std::invalid_argument {
    explicit ShapeError(const std::string& what) : std::invalid_argument(what) {}
};

struct ValueError : std::invalid_argument {
    explicit ValueError(const std::string& what) : std::invalid_argument(what) {}
};

inline std::size_t shape_size(const Shape& shape) {
    std::size_t n = 1;
    for (std::size_t extent : shape) n *= extent;
    return n;
}

std::string shape_to_string(const Shape& shape);

// Dense row-major array of doubles. Rank 0 is a scalar (one element).
class Tensor {
public:
    Tensor() : shape_{}, data_(1, 0.0) {}
    explicit Tensor(Shape shape) : shape_(std::move(shape)), data_(shape_size(shape_), 0.0) {}
    Tensor(Shape shape, std::vector<double> data) : shape_(std::move(shape)), data_(std::move(data)) {
        if (data_.size() != shape_size(shape_)) {
            throw ShapeError("tensor data length " + std::to_string(data_.size()) +
                             " does not match shape " + shape_to_string(shape_));
        }
    }

    static Tensor scalar(double v) {
        Tensor t;
        t.data_[0] = v;
        return t;
    }
    static Tensor zeros(Shape shape) { return Tensor(std::move(shape)); }
    static Tensor full(Shape shape, double v) {
        Tensor t(std::move(shape));
        for (double& x : t.data_) x = v;
        return t;
    }

    const Shape& shape() const { return shape_; }
    std::size_t rank() const { return shape_.size(); }
    std::size_t size() const { return data_.size(); }

    std::size_t rows() const { return shape_.empty() ? 1 : shape_[0]; }
    std::size_t cols() const { return shape_.size() < 2 ? 1 : shape_[1]; }

    double& operator[](std::size_t i) { return data_[i]; }
    double operator[](std::size_t i) const { return data_[i]; }
    double& at(std::size_t i, std::size_t j) { return data_[i * cols() + j]; }
    double at(std::size_t i, std::size_t j) const { return data_[i * cols() + j]; }

    std::vector<double>& data() { return data_; }
    const std::vector<double>& data() const { return data_; }

    bool same_shape(const Tensor& other) const { return shape_ == other.shape_; }
    bool is_scalar() const { return shape_.empty(); }
    double scalar_value() const {
        if (!is_scalar()) throw ShapeError("tensor of shape " + shape_to_string(shape_) + " is not a scalar");
        return data_[0];
    }

    void fill(double v) {
        for (double& x : data_) x = v;
    }

private:
    Shape shape_;
    std::vector<double> data_;
};

inline void check_same_shape(const Tensor& a, const Tensor& b, const char* op) {
    if (!a.same_shape(b)) {
        throw ShapeError(std::string(op) + ": shape mismatch " + shape_to_string(a.shape()) +
                         " vs " + shape_to_string(b.shape()));
    }
}

}  // namespace sgraf

#endif  // SGRAF_TENSOR_HPP_
