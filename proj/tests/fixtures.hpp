#pragma once

#include "qswitch/certify.hpp"

namespace fixture {

using qswitch::Mat;

inline qswitch::ModeDef mode1() {
  return {1, (Mat(2, 2) << 0, -1, -1, -2).finished(), (Mat(2, 1) << 1, -1).finished(),
          (Mat(1, 2) << 1, 1).finished(), (Mat(1, 2) << -1, 2).finished()};
}

inline qswitch::ModeDef mode2() {
  return {2, (Mat(2, 2) << 1, 2, -2, -1).finished(), (Mat(2, 1) << -2, 1).finished(),
          (Mat(1, 2) << 1, -1).finished(), (Mat(1, 2) << 1, -1).finished()};
}

inline qswitch::SwitchedSystem example_system() { return qswitch::SwitchedSystem({mode1(), mode2()}, 0.5); }

inline qswitch::CertParams example_params(int N = 11, int grid = 1024) {
  qswitch::CertParams p;
  p.N = N;
  p.grid_points = grid;
  p.per_mode[1] = {Mat::Identity(2, 2), 1.124, 47.0};
  p.per_mode[2] = {Mat::Identity(2, 2), 1.09, 80.0};
  return p;
}

}  // namespace fixture
