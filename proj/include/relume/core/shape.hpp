#pragma once

#include <array>
#include <cstdint>
#include <initializer_list>
#include <numeric>
#include <stdexcept>
#include <string>
#include <vector>

namespace relume {

// Dense row-major shape, rank 0..4. Rank 0 is a scalar with one element.
class Shape {
public:
    Shape() = default;
    Shape(std::initializer_list<int> dims) : dims_(dims) { check(); }
    explicit Shape(std::vector<int> dims) : dims_(std::move(dims)) { check(); }

    int rank() const { return static_cast<int>(dims_.size()); }
    int operator[](int i) const { return dims_[static_cast<size_t>(i)]; }

    std::int64_t numel() const {
        std::int64_t n = 1;
        for (int d : dims_) n *= d;
        return n;
    }

    bool operator==(const Shape& o) const { return dims_ == o.dims_; }
    bool operator!=(const Shape& o) const { return !(*this == o); }

    const std::vector<int>& dims() const { return dims_; }

    std::string str() const {
        std::string s = "(";
        for (size_t i = 0; i < dims_.size(); ++i) {
            if (i) s += ",";
            s += std::to_string(dims_[i]);
        }
        return s + ")";
    }

private:
    void check() const {
        if (dims_.size() > 4) throw std::invalid_argument("Shape: rank > 4");
        for (int d : dims_)
            if (d <= 0) throw std::invalid_argument("Shape: nonpositive dim in " + str());
    }
    std::vector<int> dims_;
};

} // namespace relume
