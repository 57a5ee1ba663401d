#pragma once
#include <complex>
#include <string_view>

#include <Eigen/Core>

#include "gfamp/errors.hpp"

namespace gfamp {

enum class Field { real, cplx };

inline const char* field_name(Field f) { return f == Field::real ? "real" : "complex"; }

inline Field field_from_name(std::string_view s) {
  if (s == "real") return Field::real;
  if (s == "complex") return Field::cplx;
  throw ConfigError("unknown field: " + std::string(s));
}

template <class S>
struct scalar_traits;

template <>
struct scalar_traits<float> {
  using real_t = float;
  static constexpr bool is_complex = false;
  static constexpr Field field = Field::real;
  // kappa: real dimensions per scalar; shows up in Gaussian exponents and prefactors
  static constexpr int kappa = 1;
};

template <>
struct scalar_traits<double> {
  using real_t = double;
  static constexpr bool is_complex = false;
  static constexpr Field field = Field::real;
  static constexpr int kappa = 1;
};

template <>
struct scalar_traits<std::complex<float>> {
  using real_t = float;
  static constexpr bool is_complex = true;
  static constexpr Field field = Field::cplx;
  static constexpr int kappa = 2;
};

template <>
struct scalar_traits<std::complex<double>> {
  using real_t = double;
  static constexpr bool is_complex = true;
  static constexpr Field field = Field::cplx;
  static constexpr int kappa = 2;
};

template <class S>
using real_of = typename scalar_traits<S>::real_t;

template <class S>
using Mat = Eigen::Matrix<S, Eigen::Dynamic, Eigen::Dynamic>;

template <class S>
using Vec = Eigen::Matrix<S, Eigen::Dynamic, 1>;

using MatXd = Eigen::MatrixXd;
using VecXd = Eigen::VectorXd;

// |z|^2 as a double regardless of scalar type
template <class S>
inline double abs2(const S& z) {
  if constexpr (scalar_traits<S>::is_complex)
    return double(z.real()) * z.real() + double(z.imag()) * z.imag();
  else
    return double(z) * z;
}

}  // namespace gfamp
