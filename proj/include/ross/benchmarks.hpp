#pragma once

#include <cstdint>
#include <vector>

#include "ross/fiber.hpp"
#include "ross/readout.hpp"
#include "ross/receiver.hpp"

namespace ross {

/// Tenth-order NARMA recursion driven by u. y[0] = 0 and indices before
/// the start read as zero, so y[1] = 0.1 always. Throws once |y| exceeds
/// 10 (the recursion has a finite basin of attraction).
std::vector<double> narma10(const std::vector<double>& u);

struct NarmaSequence {
  std::vector<double> u;
  std::vector<double> y;
  int regenerations = 0;  ///< diverged drives discarded before success
};

/// Draws u ~ U[0, 0.5] and evaluates the recursion, redrawing with a fresh
/// derived seed whenever the sequence diverges. Gives up after max_regen
/// attempts.
NarmaSequence narma10_with_guard(std::size_t n, std::uint64_t seed,
                                 int max_regen = 10);

/// Per-delay linear memory of a set of node outputs: m[i-1] is the squared
/// correlation between u[n-i] and its best linear reconstruction from the
/// current outputs (single tap plus bias), measured on rows after the
/// first n_train. All delays share the row range starting at i_max so the
/// estimates are comparable.
std::vector<double> memory_function(const DecisionSamples& samples,
                                    const std::vector<double>& u,
                                    std::size_t i_max, std::size_t n_train);

/// Sum of the memory function.
double memory_capacity(const std::vector<double>& m);

/// Small-signal intensity-modulation response of fiber + photodiode,
/// probed with flat multitone modulation. Gain is normalized to the
/// lowest probed frequency.
struct FadingProfile {
  std::vector<double> freq_hz;
  std::vector<double> gain;
};

FadingProfile fading_profile(const FiberSpec& fiber, double max_freq_hz,
                             std::uint64_t seed, std::size_t n_tones = 256);

/// Analytic nulls of the chromatic-dispersion power fading
/// cos(2 pi^2 beta2 L f^2): f_k = sqrt((2k+1) / (4 pi |beta2| L)).
std::vector<double> fading_null_frequencies(const FiberSpec& fiber, int count);

/// Local minima of a measured profile, parabolically refined. Returns at
/// most count frequencies in ascending order.
std::vector<double> find_profile_minima(const FadingProfile& p, int count);

}  // namespace ross
