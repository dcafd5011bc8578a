#include "isosurface/mc33.hpp"

#include <cstdint>

namespace meshforge::detail {
namespace {

#include "isosurface/mc33_tables.inc"

// The tables list triangles clockwise seen from the positive side.
constexpr bool kReverseWinding = false;

class CubeTriangulator {
 public:
  CubeTriangulator(const std::array<double, 8>& v, std::array<std::int8_t, 36>& out)
      : v_(v), out_(out) {}

  int run();

 private:
  template <std::size_t N>
  void emit(const std::int8_t (&tri)[N], int count) {
    for (int t = 0; t < count; ++t) {
      const std::int8_t a = tri[3 * t];
      const std::int8_t b = tri[3 * t + 1];
      const std::int8_t c = tri[3 * t + 2];
      out_[3 * n_] = a;
      out_[3 * n_ + 1] = kReverseWinding ? c : b;
      out_[3 * n_ + 2] = kReverseWinding ? b : c;
      ++n_;
    }
  }

  bool test_face(int face) const;
  bool test_interior(int s) const;

  const std::array<double, 8>& v_;
  std::array<std::int8_t, 36>& out_;
  int n_ = 0;
  int case_ = 0;
  int config_ = 0;
  int subconfig_ = 0;
};

// Asymptotic decider on one face. A negative face code inverts the answer.
bool CubeTriangulator::test_face(int face) const {
  double a = 0, b = 0, c = 0, d = 0;
  switch (face < 0 ? -face : face) {
    case 1: a = v_[0]; b = v_[4]; c = v_[5]; d = v_[1]; break;
    case 2: a = v_[1]; b = v_[5]; c = v_[6]; d = v_[2]; break;
    case 3: a = v_[2]; b = v_[6]; c = v_[7]; d = v_[3]; break;
    case 4: a = v_[3]; b = v_[7]; c = v_[4]; d = v_[0]; break;
    case 5: a = v_[0]; b = v_[3]; c = v_[2]; d = v_[1]; break;
    case 6: a = v_[4]; b = v_[7]; c = v_[6]; d = v_[5]; break;
    default: return false;
  }
  const double det = a * c - b * d;
  if (det == 0.0) return face >= 0;
  return face * a * det >= 0;
}

// Trilinear interior test; s carries the expected orientation.
bool CubeTriangulator::test_interior(int s) const {
  double t = 0, at = 0, bt = 0, ct = 0, dt = 0;
  int edge = -1;
  switch (case_) {
    case 4:
    case 10: {
      const double a = (v_[4] - v_[0]) * (v_[6] - v_[2]) - (v_[7] - v_[3]) * (v_[5] - v_[1]);
      const double b = v_[2] * (v_[4] - v_[0]) + v_[0] * (v_[6] - v_[2]) -
                       v_[1] * (v_[7] - v_[3]) - v_[3] * (v_[5] - v_[1]);
      if (a == 0.0) return s > 0;
      t = -b / (2 * a);
      if (t < 0 || t > 1) return s > 0;
      at = v_[0] + (v_[4] - v_[0]) * t;
      bt = v_[3] + (v_[7] - v_[3]) * t;
      ct = v_[2] + (v_[6] - v_[2]) * t;
      dt = v_[1] + (v_[5] - v_[1]) * t;
      break;
    }
    case 6:
    case 7:
    case 12:
    case 13:
      switch (case_) {
        case 6: edge = kTest6[config_][2]; break;
        case 7: edge = kTest7[config_][4]; break;
        case 12: edge = kTest12[config_][3]; break;
        default: edge = kTiling13_5_1[config_][subconfig_][0]; break;
      }
      switch (edge) {
        case 0:
          t = v_[0] / (v_[0] - v_[1]);
          bt = v_[3] + (v_[2] - v_[3]) * t;
          ct = v_[7] + (v_[6] - v_[7]) * t;
          dt = v_[4] + (v_[5] - v_[4]) * t;
          break;
        case 1:
          t = v_[1] / (v_[1] - v_[2]);
          bt = v_[0] + (v_[3] - v_[0]) * t;
          ct = v_[4] + (v_[7] - v_[4]) * t;
          dt = v_[5] + (v_[6] - v_[5]) * t;
          break;
        case 2:
          t = v_[2] / (v_[2] - v_[3]);
          bt = v_[1] + (v_[0] - v_[1]) * t;
          ct = v_[5] + (v_[4] - v_[5]) * t;
          dt = v_[6] + (v_[7] - v_[6]) * t;
          break;
        case 3:
          t = v_[3] / (v_[3] - v_[0]);
          bt = v_[2] + (v_[1] - v_[2]) * t;
          ct = v_[6] + (v_[5] - v_[6]) * t;
          dt = v_[7] + (v_[4] - v_[7]) * t;
          break;
        case 4:
          t = v_[4] / (v_[4] - v_[5]);
          bt = v_[7] + (v_[6] - v_[7]) * t;
          ct = v_[3] + (v_[2] - v_[3]) * t;
          dt = v_[0] + (v_[1] - v_[0]) * t;
          break;
        case 5:
          t = v_[5] / (v_[5] - v_[6]);
          bt = v_[4] + (v_[7] - v_[4]) * t;
          ct = v_[0] + (v_[3] - v_[0]) * t;
          dt = v_[1] + (v_[2] - v_[1]) * t;
          break;
        case 6:
          t = v_[6] / (v_[6] - v_[7]);
          bt = v_[5] + (v_[4] - v_[5]) * t;
          ct = v_[1] + (v_[0] - v_[1]) * t;
          dt = v_[2] + (v_[3] - v_[2]) * t;
          break;
        case 7:
          t = v_[7] / (v_[7] - v_[4]);
          bt = v_[6] + (v_[5] - v_[6]) * t;
          ct = v_[2] + (v_[1] - v_[2]) * t;
          dt = v_[3] + (v_[0] - v_[3]) * t;
          break;
        case 8:
          t = v_[0] / (v_[0] - v_[4]);
          bt = v_[3] + (v_[7] - v_[3]) * t;
          ct = v_[2] + (v_[6] - v_[2]) * t;
          dt = v_[1] + (v_[5] - v_[1]) * t;
          break;
        case 9:
          t = v_[1] / (v_[1] - v_[5]);
          bt = v_[0] + (v_[4] - v_[0]) * t;
          ct = v_[3] + (v_[7] - v_[3]) * t;
          dt = v_[2] + (v_[6] - v_[2]) * t;
          break;
        case 10:
          t = v_[2] / (v_[2] - v_[6]);
          bt = v_[1] + (v_[5] - v_[1]) * t;
          ct = v_[0] + (v_[4] - v_[0]) * t;
          dt = v_[3] + (v_[7] - v_[3]) * t;
          break;
        case 11:
          t = v_[3] / (v_[3] - v_[7]);
          bt = v_[2] + (v_[6] - v_[2]) * t;
          ct = v_[1] + (v_[5] - v_[1]) * t;
          dt = v_[0] + (v_[4] - v_[0]) * t;
          break;
        default:
          return s > 0;
      }
      break;
    default:
      return s > 0;
  }

  int test = 0;
  if (at >= 0) test += 1;
  if (bt >= 0) test += 2;
  if (ct >= 0) test += 4;
  if (dt >= 0) test += 8;
  switch (test) {
    case 5:
      if (at * ct - bt * dt < 0) return s > 0;
      break;
    case 10:
      if (at * ct - bt * dt >= 0) return s > 0;
      break;
    case 7:
    case 11:
    case 13:
    case 14:
    case 15:
      return s < 0;
    default:
      return s > 0;
  }
  return s < 0;
}

int CubeTriangulator::run() {
  const int index = cube_index(v_);
  case_ = kCases[index][0];
  config_ = kCases[index][1];
  subconfig_ = 0;

  switch (case_) {
    case 0:
      break;
    case 1:
      emit(kTiling1[config_], 1);
      break;
    case 2:
      emit(kTiling2[config_], 2);
      break;
    case 3:
      if (test_face(kTest3[config_])) {
        emit(kTiling3_2[config_], 4);
      } else {
        emit(kTiling3_1[config_], 2);
      }
      break;
    case 4:
      if (test_interior(kTest4[config_])) {
        emit(kTiling4_1[config_], 2);
      } else {
        emit(kTiling4_2[config_], 6);
      }
      break;
    case 5:
      emit(kTiling5[config_], 3);
      break;
    case 6:
      if (test_face(kTest6[config_][0])) {
        emit(kTiling6_2[config_], 5);
      } else if (test_interior(kTest6[config_][1])) {
        emit(kTiling6_1_1[config_], 3);
      } else {
        emit(kTiling6_1_2[config_], 9);
      }
      break;
    case 7:
      if (test_face(kTest7[config_][0])) subconfig_ += 1;
      if (test_face(kTest7[config_][1])) subconfig_ += 2;
      if (test_face(kTest7[config_][2])) subconfig_ += 4;
      switch (subconfig_) {
        case 0: emit(kTiling7_1[config_], 3); break;
        case 1: emit(kTiling7_2[config_][0], 5); break;
        case 2: emit(kTiling7_2[config_][1], 5); break;
        case 3: emit(kTiling7_3[config_][0], 9); break;
        case 4: emit(kTiling7_2[config_][2], 5); break;
        case 5: emit(kTiling7_3[config_][1], 9); break;
        case 6: emit(kTiling7_3[config_][2], 9); break;
        default:
          if (test_interior(kTest7[config_][3])) {
            emit(kTiling7_4_2[config_], 9);
          } else {
            emit(kTiling7_4_1[config_], 5);
          }
          break;
      }
      break;
    case 8:
      emit(kTiling8[config_], 2);
      break;
    case 9:
      emit(kTiling9[config_], 4);
      break;
    case 10:
      if (test_face(kTest10[config_][0])) {
        if (test_face(kTest10[config_][1])) {
          emit(kTiling10_1_1Inv[config_], 4);
        } else {
          emit(kTiling10_2[config_], 8);
        }
      } else if (test_face(kTest10[config_][1])) {
        emit(kTiling10_2Inv[config_], 8);
      } else if (test_interior(kTest10[config_][2])) {
        emit(kTiling10_1_1[config_], 4);
      } else {
        emit(kTiling10_1_2[config_], 8);
      }
      break;
    case 11:
      emit(kTiling11[config_], 4);
      break;
    case 12:
      if (test_face(kTest12[config_][0])) {
        if (test_face(kTest12[config_][1])) {
          emit(kTiling12_1_1Inv[config_], 4);
        } else {
          emit(kTiling12_2[config_], 8);
        }
      } else if (test_face(kTest12[config_][1])) {
        emit(kTiling12_2Inv[config_], 8);
      } else if (test_interior(kTest12[config_][2])) {
        emit(kTiling12_1_1[config_], 4);
      } else {
        emit(kTiling12_1_2[config_], 8);
      }
      break;
    case 13: {
      for (int f = 0; f < 6; ++f) {
        if (test_face(kTest13[config_][f])) subconfig_ += 1 << f;
      }
      const int sub = kSubconfig13[subconfig_];
      if (sub < 0) {
        break;  // face tests cannot produce this combination
      } else if (sub == 0) {
        emit(kTiling13_1[config_], 4);
      } else if (sub <= 6) {
        emit(kTiling13_2[config_][sub - 1], 6);
      } else if (sub <= 18) {
        emit(kTiling13_3[config_][sub - 7], 10);
      } else if (sub <= 22) {
        emit(kTiling13_4[config_][sub - 19], 12);
      } else if (sub <= 26) {
        subconfig_ = sub - 23;
        if (test_interior(kTest13[config_][6])) {
          emit(kTiling13_5_1[config_][subconfig_], 6);
        } else {
          emit(kTiling13_5_2[config_][subconfig_], 10);
        }
      } else if (sub <= 38) {
        emit(kTiling13_3Inv[config_][sub - 27], 10);
      } else if (sub <= 44) {
        emit(kTiling13_2Inv[config_][sub - 39], 6);
      } else {
        emit(kTiling13_1Inv[config_], 4);
      }
      break;
    }
    case 14:
      emit(kTiling14[config_], 4);
      break;
    default:
      break;
  }
  return n_;
}

}  // namespace

int cube_index(const std::array<double, 8>& v) {
  int index = 0;
  for (int p = 0; p < 8; ++p) {
    if (v[p] > 0) index |= 1 << p;
  }
  return index;
}

bool is_ambiguous(int index) {
  switch (kCases[index][0]) {
    case 3:
    case 4:
    case 6:
    case 7:
    case 10:
    case 12:
    case 13:
      return true;
    default:
      return false;
  }
}

int triangulate(const std::array<double, 8>& v, std::array<std::int8_t, 36>& codes) {
  return CubeTriangulator(v, codes).run();
}

}  // namespace meshforge::detail
