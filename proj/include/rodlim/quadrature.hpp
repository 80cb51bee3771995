#pragma once

#include <array>
#include <cmath>
#include <span>
#include <stdexcept>

namespace rodlim::quadrature {

struct GaussPoint {
  double s;  ///< position in [0, 1]
  double w;  ///< weight on [0, 1]
};

namespace detail {
inline constexpr std::array<GaussPoint, 1> g1{{{0.5, 1.0}}};
inline constexpr std::array<GaussPoint, 2> g2{{{0.21132486540518711775, 0.5}, {0.78867513459481288225, 0.5}}};
inline constexpr std::array<GaussPoint, 3> g3{{{0.11270166537925831148, 5.0 / 18.0},
                                              {0.5, 8.0 / 18.0},
                                              {0.88729833462074168852, 5.0 / 18.0}}};
inline constexpr std::array<GaussPoint, 4> g4{{{0.06943184420297371239, 0.17392742256872692869},
                                              {0.33000947820757186760, 0.32607257743127307131},
                                              {0.66999052179242813240, 0.32607257743127307131},
                                              {0.93056815579702628761, 0.17392742256872692869}}};
inline constexpr std::array<GaussPoint, 5> g5{{{0.04691007703066800360, 0.11846344252809454376},
                                              {0.23076534494715845448, 0.23931433524968323402},
                                              {0.5, 0.28444444444444444444},
                                              {0.76923465505284154552, 0.23931433524968323402},
                                              {0.95308992296933199640, 0.11846344252809454376}}};
}  // namespace detail

/// Gauss-Legendre rule with n points on [0, 1]; exact for degree 2n - 1.
inline std::span<const GaussPoint> gauss(int n) {
  switch (n) {
    case 1:
      return detail::g1;
    case 2:
      return detail::g2;
    case 3:
      return detail::g3;
    case 4:
      return detail::g4;
    case 5:
      return detail::g5;
    default:
      throw std::invalid_argument("gauss: supported orders are 1..5");
  }
}

}  // namespace rodlim::quadrature
