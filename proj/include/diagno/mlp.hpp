#pragma once

#include "diagno/random.hpp"
#include "diagno/types.hpp"

#include <cstdint>
#include <filesystem>
#include <string>
#include <string_view>
#include <vector>

namespace diagno {

inline constexpr Eigen::Index kHidden1 = 16;
inline constexpr Eigen::Index kHidden2 = 8;

/// Per-feature z-scoring fitted on training rows. Zero-variance features are dropped.
struct Standardizer {
    Vector mean;
    Vector sd;
    /// 1 where the feature is kept.
    std::vector<unsigned char> keep;

    Eigen::Index input_dim() const { return mean.size(); }
    Eigen::Index kept_dim() const;
    /// Standardized values of the kept features.
    Vector apply(const Vector& raw) const;
    /// Applies to every row of a samples x features matrix.
    Matrix apply_rows(const Matrix& raw) const;
};

Standardizer fit_standardizer(const Matrix& rows);
/// Identity transform over d features (mean 0, sd 1, all kept).
Standardizer identity_standardizer(Eigen::Index d);

/// input -> 16 -> 8 -> 1 with ReLU hidden layers and a sigmoid output.
struct MlpModel {
    std::vector<std::string> feature_names;
    Standardizer standardizer;
    Matrix w1; // 16 x kept
    Vector b1;
    Matrix w2; // 8 x 16
    Vector b2;
    Matrix w3; // 1 x 8
    double b3 = 0.0;
    double dropout = 0.2;
    /// SHA-256 of the training configuration, empty for hand-built models.
    std::string config_hash;

    void validate() const;
};

/// Zero weights and biases over the given standardizer.
MlpModel zero_model(std::vector<std::string> names, Standardizer standardizer, double dropout = 0.2);
/// He-normal weights, zero biases.
MlpModel he_init(std::vector<std::string> names, Standardizer standardizer, double dropout, Random& rng);

/// Pre-sigmoid output for an already standardized input.
double logit_standardized(const MlpModel& model, const Vector& xs);
double logit(const MlpModel& model, const Vector& raw);

/**
 * Probability for a raw input. With training=true inverted dropout masks (from `seed`) are
 * applied to both hidden layers; with training=false the seed is ignored.
 */
double forward(const MlpModel& model, const Vector& raw, bool training = false, std::uint64_t seed = 0);

/// Gradients with the same shapes as the model parameters.
struct Gradients {
    Matrix w1;
    Vector b1;
    Matrix w2;
    Vector b2;
    Matrix w3;
    double b3 = 0.0;

    static Gradients zeros_like(const MlpModel& m);
    Gradients& operator+=(const Gradients& other);
    Gradients& operator*=(double s);
    double squared_norm() const;
};

/// Exact gradient of loss_scale * BCE(y, forward(x)) with dropout disabled.
Gradients backprop_gradient(const MlpModel& model, const Vector& raw, int y, double loss_scale = 1.0);

/// Gradient of the logit with respect to the standardized kept inputs.
Vector logit_input_gradient(const MlpModel& model, const Vector& xs);

double bce_loss(const MlpModel& model, const Matrix& rows, const std::vector<int>& labels);

struct TrainConfig {
    double lr = 0.001;
    std::size_t batch_size = 16;
    int max_epochs = 500;
    int patience = 10;
    double val_fraction = 0.2;
    std::uint64_t seed = 0;
    double beta1 = 0.9;
    double beta2 = 0.999;
    double eps = 1e-8;
    double dropout = 0.2;

    void validate() const;
};

std::string format_train_config(const TrainConfig& c);
/// Missing keys keep their defaults; unknown keys are rejected.
TrainConfig parse_train_config(std::string_view text);

struct EpochLog {
    int epoch = 0;
    double train_loss = 0.0;
    double val_loss = 0.0;
};

struct TrainResult {
    MlpModel model;
    std::vector<EpochLog> log;
    int best_epoch = 0;
    std::vector<std::size_t> train_rows;
    std::vector<std::size_t> val_rows;
};

/**
 * Stratified validation split, standardization fitted on the training rows, He init,
 * Adam on mini-batch BCE with dropout, early stopping on validation loss. Returns the
 * weights of the best validation epoch. max_epochs = 0 returns the initialized model.
 */
TrainResult train(const Matrix& rows, const std::vector<int>& labels, const std::vector<std::string>& names,
                  const TrainConfig& config);

double accuracy(const MlpModel& model, const Matrix& rows, const std::vector<int>& labels);
std::vector<int> predict_labels(const MlpModel& model, const Matrix& rows);

std::string format_model(const MlpModel& model);
MlpModel parse_model(std::string_view text);
void save_model(const MlpModel& model, const std::filesystem::path& path);
MlpModel load_model(const std::filesystem::path& path);

std::string format_training_log(const std::vector<EpochLog>& log);

} // namespace diagno
