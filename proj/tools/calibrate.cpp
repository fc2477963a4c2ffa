// pemss: prediction-error identification of state-space models
// SPDX-License-Identifier: Apache-2.0
//
// pemss_calibrate [n_seeds] [variant] [var_e] [n_test]
//
// Prints, per generator seed, the data-generating system's own scores on its
// seeded record pair: the achievable ceiling any estimator is measured
// against. Useful for picking a record whose test half is representative.
#include <cstdio>
#include <cstdlib>
#include <string>

#include "pemss/benchmarks.hpp"
#include "pemss/metrics.hpp"

using namespace pemss;

int main(int argc, char** argv) {
  int n_seeds = argc > 1 ? std::atoi(argv[1]) : 10;
  DiskParams dp;
  GenSpec gs;
  if (argc > 2) gs.variant = disk_variant_from_name(argv[2]);
  if (argc > 3) gs.noise.var_e = std::atof(argv[3]);
  const Index n_test = argc > 4 ? std::atoll(argv[4]) : 2000;

  std::printf("variant %s, var_e %.3e, n %lld/%lld\n",
              disk_variant_name(gs.variant).c_str(), gs.noise.var_e,
              static_cast<long long>(gs.n), static_cast<long long>(n_test));
  std::printf("%4s  %18s  %18s  %8s\n", "seed", "train sim/pred",
              "test sim/pred", "SNR[dB]");
  for (int s = 0; s < n_seeds; ++s) {
    gs.seed = static_cast<std::uint64_t>(s);
    const BenchmarkPair bp = gen_disk_pair(dp, gs, n_test);
    const TrueBaseline btr = true_baseline(bp.train.data, bp.train.truth);
    const TrueBaseline bte = true_baseline(bp.test.data, bp.test.truth);
    const double snr = snr_db(bp.train.truth.y0, bp.train.truth.v);
    std::printf("%4d  %8.2f / %7.2f  %8.2f / %7.2f  %8.2f\n", s,
                100.0 * btr.bfr_sim, 100.0 * btr.bfr_pred, 100.0 * bte.bfr_sim,
                100.0 * bte.bfr_pred, snr);
  }
  return 0;
}
