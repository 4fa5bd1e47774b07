#pragma once

#include <cstdint>

namespace gaudp::testsupport {

struct TwoDeltaResult {
  double frac_positive = 0;   // fraction of samples in the +1 mode
  double center_neg = 0;      // mean of the negative mode
  double center_pos = 0;      // mean of the positive mode
  double final_loss = 0;
};

// Trains an unconditional 1D denoiser on the two-delta dataset {-1,+1} and
// draws `n_samples` DDPM samples (or DDIM when ddim is true).
TwoDeltaResult run_two_delta(int train_steps, int n_samples, std::uint64_t seed,
                             bool ddim = false);

}  // namespace gaudp::testsupport
