// One photodetection step from |ee>: a click on either detector leaves the
// qubits in a Bell state, whatever the output phases.
#include <cstdio>

#include "qtraj/engine.hpp"

int main() {
  using namespace qtraj;
  const auto prop = joint_propagator(0.01, 0.3, 1.1);
  const auto ee = PureTwoQubitState::excited();
  for (const auto& k : photodetection_kraus(prop)) {
    const auto pc = std::get<PhotoCounts>(k.outcome);
    const Vector4c v = k.matrix * ee.amplitudes();
    const double p = v.squaredNorm();
    if (p == 0.0) {
      std::printf("(%d,%d)  p = 0\n", pc.n3, pc.m4);
      continue;
    }
    const auto post = apply_kraus(ee, k).state;
    const auto bell = bell_decompose(post);
    std::printf("(%d,%d)  p = %.6g  C = %.12f  b = %+.4f c = %+.4f e = %+.4f\n", pc.n3, pc.m4, p,
                concurrence_pure(post), bell.b, bell.c, bell.e);
  }
}
