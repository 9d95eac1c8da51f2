#pragma once

#include <array>
#include <cstdint>
#include <span>
#include <string>
#include <vector>

#include <Eigen/Dense>

#include "segraph/providers.hpp"
#include "segraph/scoring.hpp"

namespace segraph {

struct VerifierDims {
  int d = kEncoderDim;
  int k = 256;                            // attention dim
  std::array<int, 3> hidden{512, 256, 128};  // MLP widths after the 2d input
};

// All blocks are stored as matrices; vectors are single columns.
struct CoAttentionParams {
  Eigen::MatrixXd w_l;   // d x d
  Eigen::MatrixXd w_s;   // k x d
  Eigen::MatrixXd w_c;   // k x d
  Eigen::MatrixXd w_as;  // k x 1
  Eigen::MatrixXd w_ac;  // k x 1
};

struct MlpLayer {
  Eigen::MatrixXd weight;  // out x in
  Eigen::MatrixXd bias;    // out x 1
  Eigen::MatrixXd gain;    // out x 1 (layer norm; unused on the output layer)
  Eigen::MatrixXd shift;   // out x 1
};

struct MlpParams {
  std::array<MlpLayer, 4> layers;
  double dropout = 0.3;
};

struct VerifierParams {
  CoAttentionParams coattention;
  MlpParams mlp;

  VerifierDims dims() const;
  // Every trainable block in a fixed order (checkpoint and optimiser layout).
  std::vector<Eigen::MatrixXd*> blocks();
  std::vector<const Eigen::MatrixXd*> blocks() const;
  std::uint64_t checksum() const;
  friend bool operator==(const VerifierParams& a, const VerifierParams& b);
};

// Glorot-uniform weights, zero biases, unit layer-norm gains.
VerifierParams init_verifier(const VerifierDims& dims, std::uint64_t seed);
// Every block zero (layer-norm gains included).
VerifierParams zero_verifier(const VerifierDims& dims);

struct CoAttentionOutput {
  Eigen::MatrixXd f;    // N x T affinity
  Eigen::MatrixXd h_s;  // k x T
  Eigen::MatrixXd h_c;  // k x N
  Eigen::VectorXd a_s;  // T
  Eigen::VectorXd a_c;  // N
  Eigen::VectorXd z;    // 2d: [s_hat, c_hat]
};

// h1: N x d history summary, h2: T x d current message. Throws DataError on
// shape mismatches.
CoAttentionOutput coattention_forward(const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2,
                                      const CoAttentionParams& params);

enum class Mode { kTrain, kEval };

// Random stream for dropout masks; only read in train mode.
struct DropoutStream {
  std::uint64_t state = 0;
  double next_uniform();
};

struct MlpTrace {
  std::array<Eigen::VectorXd, 4> input;   // layer inputs
  std::array<Eigen::VectorXd, 4> pre;     // affine outputs
  std::array<Eigen::VectorXd, 3> normed;  // layer-norm x-hat
  std::array<double, 3> inv_std{};
  std::array<Eigen::VectorXd, 3> mask;    // dropout scale per unit (0 or 1/(1-rate))
  double p = 0.5;
};

// Sigmoid probability. Eval mode disables dropout. Throws NumericError naming
// the 1-based layer index when an activation becomes non-finite.
double mlp_forward(const Eigen::VectorXd& z, const MlpParams& params, Mode mode, DropoutStream* dropout = nullptr,
                   MlpTrace* trace = nullptr);

struct ClassWeights {
  double pos = 1.0;
  double neg = 1.0;
};

inline constexpr double kProbClamp = 1e-7;

// -[w_pos y log p + w_neg (1 - y) log(1 - p)] with p clamped to
// [1e-7, 1 - 1e-7]. Throws DataError for labels other than 0 or 1.
double bce_loss(double p, int label, const ClassWeights& weights);
double bce_loss(std::span<const double> p, std::span<const int> labels, const ClassWeights& weights);

struct VerifierSample {
  Eigen::MatrixXd h1;
  Eigen::MatrixXd h2;
  int label = 0;
};

// Loss and gradient (same block layout as VerifierParams::blocks()) for one
// sample. Dropout masks come from `dropout` in train mode.
double loss_and_gradient(const VerifierParams& params, const VerifierSample& sample, const ClassWeights& weights,
                         Mode mode, DropoutStream* dropout, std::vector<Eigen::MatrixXd>* gradient);
// Same, but adds the gradient into `sum`, which must already have the block
// shapes.
double accumulate_gradient(const VerifierParams& params, const VerifierSample& sample, const ClassWeights& weights,
                           Mode mode, DropoutStream* dropout, std::vector<Eigen::MatrixXd>& sum);

double predict(const VerifierParams& params, const Eigen::MatrixXd& h1, const Eigen::MatrixXd& h2);

struct TrainConfig {
  int epochs = 50;
  double lr = 1e-3;
  int batch_size = 8;
  std::uint64_t seed = 11;
  int stage = 1;               // only the frozen-encoder stage is supported
  double train_fraction = 0.7;
  VerifierDims dims;
};

struct TrainReport {
  std::vector<double> epoch_loss;  // mean weighted training loss per epoch
  ClassWeights class_weights;
  std::vector<std::size_t> train_index;
  std::vector<std::size_t> test_index;
  double test_accuracy = 0;
  double train_accuracy = 0;
};

// Inverse class frequency, normalised so a balanced split gives 1/1.
ClassWeights inverse_frequency_weights(std::span<const int> labels);

// Stratified split per class with a seeded shuffle; train share rounded.
void stratified_split(std::span<const int> labels, double train_fraction, std::uint64_t seed,
                      std::vector<std::size_t>& train, std::vector<std::size_t>& test);

// Mini-batch gradient descent on the class-weighted BCE. Throws DataError on
// an empty or single-class dataset and ConfigError for stage != 1.
VerifierParams train_head(std::span<const VerifierSample> dataset, const TrainConfig& config,
                          TrainReport* report = nullptr);

struct VerifierVerdict {
  double p = 0.5;
  bool flag = false;
  double i_man = 0.5;
};

inline constexpr std::string_view kNoPriorContact = "no prior contact";

// Newest message first, whitespace words, at most `budget` words. No
// messages gives the sentinel summary.
std::string summarize_history(std::span<const std::string> messages_oldest_first, int budget = kMaxStubTokens);

// Throws UnresolvedContentError when the provider cannot resolve a text.
VerifierVerdict verify_pair(const ScoredInteraction& flagged, const ContentRequest& history_summary,
                            const ContentRequest& current, const EmbeddingProvider& provider,
                            const VerifierParams& params);

// "SEGHEAD1", u32 block count, per block u32 rows, u32 cols, then f32 values
// (column-major), then f64 dropout rate.
void save_verifier(const VerifierParams& params, const std::string& path);
VerifierParams load_verifier(const std::string& path);

}  // namespace segraph
