#pragma once

#include <array>
#include <map>
#include <optional>
#include <vector>

#include "countycast/features.hpp"
#include "countycast/nn.hpp"

namespace countycast {

// Quantile levels required for a county-level incidence submission.
inline constexpr std::array<double, 7> kPublishedQuantiles = {0.025, 0.1,  0.25, 0.5,
                                                              0.75,  0.9,  0.975};

struct ModelConfig {
    int input_channels = kFeatureCount;
    std::vector<int> lstm_units = {64, 64};
    int dense_units = 32;
    int output_dim = 1;  // 1 = point head, 7 = quantile head
    int lag = 9;
    int horizon = 1;
    int epochs = 15;
    double learning_rate = 1e-3;
    int ensemble_size = 10;
    int batch_size = 32;
    std::uint64_t seed = 1;
    bool hybrid = false;
    int static_dim = 0;  // used only when hybrid

    void validate() const;
    nn::NetworkShape network_shape() const;
};

struct TrainedMember {
    nn::Network net;
    std::uint64_t seed = 0;
    int best_epoch = 0;                // 1-based epoch whose checkpoint was kept
    std::vector<double> epoch_losses;  // full-training-set loss after each epoch
};

struct Ensemble {
    ModelConfig config;
    NormalizationStats stats;
    std::vector<TrainedMember> members;
};

// Untrained member with randomized weights for the configured stack.
nn::Network build_model(const ModelConfig& config, std::uint64_t seed);

// Mini-batch Adam for config.epochs epochs; returns the checkpoint with the
// lowest full-training-set loss (earliest epoch on ties). Identical seeds
// give bit-identical members.
TrainedMember train_member(const std::vector<TrainingInstance>& instances,
                           const ModelConfig& config, std::uint64_t seed,
                           const NormalizationStats& stats,
                           const std::map<Fips, Eigen::VectorXd>* statics = nullptr);
// Convenience overload fitting the normalizer itself.
TrainedMember train_member(const std::vector<TrainingInstance>& instances,
                           const ModelConfig& config, std::uint64_t seed);

// Trains ensemble_size members with seeds config.seed + 0..size-1. Members
// may train concurrently; the result does not depend on scheduling.
Ensemble train_ensemble(const std::vector<TrainingInstance>& instances, const ModelConfig& config,
                        const std::map<Fips, Eigen::VectorXd>* statics = nullptr);

struct ForecastKey {
    Date forecast_date;
    Fips location = 0;
    int horizon = 1;
    auto operator<=>(const ForecastKey&) const = default;
};

struct ForecastEntry {
    double point = 0.0;
    std::optional<std::array<double, 7>> quantiles;  // non-decreasing, >= 0
};

struct ForecastSet {
    std::map<ForecastKey, ForecastEntry> entries;

    void merge(const ForecastSet& other);
    // Enforces non-negativity and sorted quantiles; throws on violation.
    void validate() const;
};

// Median (mean of the two central order statistics when even) across member
// outputs, denormalized and clamped at zero.
ForecastSet predict_point(const Ensemble& ensemble,
                          const std::map<Fips, Eigen::MatrixXd>& windows, Date forecast_date,
                          const std::map<Fips, Eigen::VectorXd>* statics = nullptr);

// Per-quantile median across members, sorted ascending to repair crossings,
// clamped at zero. The point value is the repaired 0.5 quantile.
ForecastSet predict_quantiles(const Ensemble& ensemble,
                              const std::map<Fips, Eigen::MatrixXd>& windows, Date forecast_date,
                              const std::map<Fips, Eigen::VectorXd>* statics = nullptr);

// Every horizon forecasts the incidence observed in week as_of; quantiles all
// equal the point value.
ForecastSet persistence_baseline(const FeatureTable& table, const EpiWeek& as_of,
                                 const std::vector<int>& horizons);

// Normalized static-attribute vectors for hybrid models; counties missing any
// attribute are absent from the result.
std::map<Fips, Eigen::VectorXd> normalized_statics(const CountyPanel& panel,
                                                   const NormalizationStats& stats);
// Fits static stats over counties with complete attributes.
void fit_static_stats(const CountyPanel& panel, NormalizationStats& stats);

// Directory-style ensemble snapshot: manifest.json (config, normalizer,
// member seeds/epochs, format version) plus one weight file per member.
// Round-trips exactly.
void save_ensemble(const Ensemble& ensemble, const std::string& dir);
Ensemble load_ensemble(const std::string& dir);

struct LagSweepRow {
    int lag = 0;
    double avg_mae = 0.0;
    int eval_weeks = 0;
};

// Retrains once per lag with training data ending before the evaluation
// span, then scores sliding inference windows against the table's incidence.
// Lags whose history does not fit are skipped with a warning.
std::vector<LagSweepRow> lag_sweep(const FeatureTable& table, const std::vector<int>& lags,
                                   ModelConfig config, int eval_weeks);

double median(std::vector<double> values);

} // namespace countycast
