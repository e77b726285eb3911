#pragma once

#include <Eigen/Dense>
#include <vector>

#include "ross/receiver.hpp"
#include "ross/transmitter.hpp"

namespace ross {

/// Tap window around the current symbol: delays -pre .. +post.
/// Centered FFE windows use pre = post = m (k = 2m+1); causal regression
/// (e.g. 10 past taps) uses pre = 9, post = 0.
struct TapWindow {
  int pre = 0;
  int post = 0;
  int width() const { return pre + post + 1; }
};

/// Row i holds the tap window around symbol first_symbol + i for every
/// output, plus a trailing bias column of ones.
struct FeatureMatrix {
  Eigen::MatrixXd x;
  std::size_t first_symbol = 0;
  Eigen::VectorXd col_mean, col_std;
  bool standardized = false;
};

FeatureMatrix assemble_features(const DecisionSamples& samples,
                                TapWindow window);

/// Standardizes all columns except the bias using the statistics of the
/// first n_train_rows rows. Idempotent access to the stats via the fields.
void standardize_features(FeatureMatrix& f, std::size_t n_train_rows);

struct ReadoutModel {
  Eigen::MatrixXd weights;  ///< features x targets
  double lambda = 0.0;
  Eigen::VectorXd col_mean, col_std;
  ModFormat format = ModFormat::analog;
  /// Trained per-axis level means (decision references); empty for ANALOG.
  std::vector<double> level_refs_i, level_refs_q;
};

/// argmin ||Xw - y||^2 + lambda ||w||^2 via QR on the stacked system
/// [X; sqrt(lambda) I]. lambda = 0 on a rank-deficient system throws with
/// the rank diagnostic. Warns to stderr when rows < columns.
Eigen::MatrixXd ridge_solve(const Eigen::MatrixXd& x,
                            const Eigen::MatrixXd& y, double lambda);

/// Fits weights on the first n_train rows and records per-axis level means
/// of the training predictions for the decision stage.
ReadoutModel train_readout(const FeatureMatrix& f, const Eigen::MatrixXd& y,
                           std::size_t n_train, double lambda,
                           ModFormat format);

Eigen::MatrixXd predict(const ReadoutModel& m, const FeatureMatrix& f);

/// Grid {1e-6 .. 1e-1} x mean row power, validated on the last quarter of
/// the training rows; returns the winning lambda.
double select_lambda(const FeatureMatrix& f, const Eigen::MatrixXd& y,
                     std::size_t n_train, ModFormat format);

/// Nearest-level slicing. PAM4: thresholds halfway between trained level
/// means; QAM: independent I/Q slicing (cross constellations snap invalid
/// corners to the nearest point).
std::vector<cplx> decide(const Eigen::MatrixXd& estimates,
                         const ReadoutModel& m);

/// Gray-coded bit error rate between decided and reference constellation
/// points.
double compute_ber(const std::vector<cplx>& decided,
                   const std::vector<cplx>& reference, ModFormat format);
double compute_ser(const std::vector<cplx>& decided,
                   const std::vector<cplx>& reference, ModFormat format);
/// <(est - ref)^2> / var(ref).
double compute_nmse(const std::vector<double>& estimate,
                    const std::vector<double>& reference);

}  // namespace ross
