#include "countycast/forecaster.hpp"

#include <algorithm>
#include <cmath>
#include <filesystem>
#include <fstream>
#include <future>
#include <thread>

#include "json.hpp"

#include "countycast/errors.hpp"
#include "countycast/log.hpp"
#include "countycast/rng.hpp"

namespace countycast {

void ModelConfig::validate() const {
    if (input_channels < 1) throw InputError("input_channels must be positive");
    if (output_dim != 1 && output_dim != 7) throw InputError("output_dim must be 1 or 7");
    if (lag < 0) throw InputError("lag must be >= 0");
    if (horizon < 1 || horizon > 4) throw InputError("horizon must be in 1..4");
    if (epochs < 1) throw InputError("epochs must be positive");
    if (!(learning_rate > 0.0)) throw InputError("learning_rate must be positive");
    if (ensemble_size < 1) throw InputError("ensemble_size must be positive");
    if (batch_size < 1) throw InputError("batch_size must be positive");
    if (hybrid && static_dim < 1) throw InputError("hybrid model needs static_dim >= 1");
    if (!hybrid && static_dim != 0) throw InputError("static_dim requires the hybrid flag");
    for (const int units : lstm_units) {
        if (units < 1) throw InputError("lstm_units must be positive");
    }
    if (dense_units < 1) throw InputError("dense_units must be positive");
}

nn::NetworkShape ModelConfig::network_shape() const {
    nn::NetworkShape shape;
    shape.input_channels = input_channels;
    shape.lstm_units = lstm_units;
    shape.dense_units = dense_units;
    shape.output_dim = output_dim;
    shape.static_dim = hybrid ? static_dim : 0;
    return shape;
}

nn::Network build_model(const ModelConfig& config, std::uint64_t seed) {
    config.validate();
    return nn::make_network(config.network_shape(), seed);
}

double median(std::vector<double> values) {
    if (values.empty()) throw InternalError("median of empty set");
    std::sort(values.begin(), values.end());
    const std::size_t n = values.size();
    if (n % 2 == 1) return values[n / 2];
    return 0.5 * (values[n / 2 - 1] + values[n / 2]);
}

namespace {

Eigen::VectorXd quantile_vector() {
    Eigen::VectorXd q(7);
    for (int i = 0; i < 7; ++i) q[i] = kPublishedQuantiles[static_cast<std::size_t>(i)];
    return q;
}

// Pre-normalized training tensors shared by every member of an ensemble.
struct PreparedData {
    std::vector<Eigen::MatrixXd> windows;  // normalized, (lag+1) x D
    std::vector<double> targets;           // normalized
    std::vector<Eigen::VectorXd> statics;  // normalized, empty when not hybrid
    int time_steps = 0;
};

PreparedData prepare(const std::vector<TrainingInstance>& instances, const ModelConfig& config,
                     const NormalizationStats& stats,
                     const std::map<Fips, Eigen::VectorXd>* statics) {
    if (instances.empty()) throw InputError("no training instances");
    PreparedData data;
    data.time_steps = static_cast<int>(instances.front().window.rows());
    data.windows.reserve(instances.size());
    data.targets.reserve(instances.size());
    for (const auto& inst : instances) {
        if (inst.window.rows() != data.time_steps || inst.window.cols() != config.input_channels) {
            throw ShapeError("training windows have inconsistent shapes");
        }
        data.windows.push_back(apply_normalizer(stats, inst.window));
        data.targets.push_back((inst.target - stats.target_mean) / stats.target_sd);
        if (config.hybrid) {
            if (statics == nullptr) throw InputError("hybrid training requires static attributes");
            auto it = statics->find(inst.county);
            if (it == statics->end()) {
                throw MissingDataError("county " + fips_code(inst.county) +
                                       " lacks static attributes for the hybrid model");
            }
            data.statics.push_back(it->second);
        }
    }
    return data;
}

// Gathers instance columns into per-step D x B batch matrices.
void fill_batch(const PreparedData& data, const std::vector<std::size_t>& order,
                std::size_t begin, std::size_t end, std::vector<nn::Matrix>& x_seq,
                Eigen::RowVectorXd& targets, nn::Matrix& statics) {
    const auto B = static_cast<Eigen::Index>(end - begin);
    const int T = data.time_steps;
    const auto D = data.windows.front().cols();
    x_seq.assign(static_cast<std::size_t>(T), nn::Matrix(D, B));
    targets.resize(B);
    const bool hybrid = !data.statics.empty();
    if (hybrid) statics.resize(data.statics.front().size(), B);
    for (std::size_t k = begin; k < end; ++k) {
        const auto b = static_cast<Eigen::Index>(k - begin);
        const auto& window = data.windows[order[k]];
        for (int t = 0; t < T; ++t) {
            x_seq[static_cast<std::size_t>(t)].col(b) = window.row(t).transpose();
        }
        targets[b] = data.targets[order[k]];
        if (hybrid) statics.col(b) = data.statics[order[k]];
    }
}

double dataset_loss(const nn::Network& net, const PreparedData& data, const ModelConfig& config,
                    const Eigen::VectorXd& quantiles) {
    const std::size_t n = data.windows.size();
    std::vector<std::size_t> order(n);
    for (std::size_t i = 0; i < n; ++i) order[i] = i;
    double total = 0.0;
    std::vector<nn::Matrix> x_seq;
    Eigen::RowVectorXd targets;
    nn::Matrix statics;
    for (std::size_t begin = 0; begin < n; begin += static_cast<std::size_t>(config.batch_size)) {
        const std::size_t end = std::min(n, begin + static_cast<std::size_t>(config.batch_size));
        fill_batch(data, order, begin, end, x_seq, targets, statics);
        const nn::Matrix out =
            nn::forward(net, x_seq, config.hybrid ? &statics : nullptr, nullptr);
        const double batch_loss = config.output_dim == 1
                                      ? nn::mse_loss(out, targets).first
                                      : nn::pinball_loss(out, targets, quantiles).first;
        total += batch_loss * static_cast<double>(end - begin);
    }
    return total / static_cast<double>(n);
}

TrainedMember train_member_prepared(const PreparedData& data, const ModelConfig& config,
                                    std::uint64_t seed) {
    TrainedMember member;
    member.seed = seed;
    member.net = nn::make_network(config.network_shape(), seed);
    nn::AdamState adam = nn::make_adam_state(member.net.shape);
    Rng shuffle_rng(seed ^ 0x9e3779b97f4a7c15ULL);
    const Eigen::VectorXd quantiles = quantile_vector();

    const std::size_t n = data.windows.size();
    nn::Parameters best_params = member.net.params;
    double best_loss = std::numeric_limits<double>::infinity();

    std::vector<nn::Matrix> x_seq;
    Eigen::RowVectorXd targets;
    nn::Matrix statics;
    for (int epoch = 1; epoch <= config.epochs; ++epoch) {
        const std::vector<std::size_t> order = shuffle_rng.permutation(n);
        for (std::size_t begin = 0; begin < n;
             begin += static_cast<std::size_t>(config.batch_size)) {
            const std::size_t end =
                std::min(n, begin + static_cast<std::size_t>(config.batch_size));
            fill_batch(data, order, begin, end, x_seq, targets, statics);
            nn::ForwardCache cache;
            const nn::Matrix out =
                nn::forward(member.net, x_seq, config.hybrid ? &statics : nullptr, &cache);
            auto [loss, grad] = config.output_dim == 1
                                    ? nn::mse_loss(out, targets)
                                    : nn::pinball_loss(out, targets, quantiles);
            if (!std::isfinite(loss)) {
                throw TrainingError("training diverged at epoch " + std::to_string(epoch));
            }
            const nn::Parameters grads = nn::backward(member.net, cache, grad);
            nn::adam_step(member.net.params, grads, adam, config.learning_rate);
        }
        const double epoch_loss = dataset_loss(member.net, data, config, quantiles);
        if (!std::isfinite(epoch_loss)) {
            throw TrainingError("training diverged at epoch " + std::to_string(epoch));
        }
        member.epoch_losses.push_back(epoch_loss);
        if (epoch_loss < best_loss) {
            best_loss = epoch_loss;
            best_params = member.net.params;
            member.best_epoch = epoch;
        }
    }
    member.net.params = std::move(best_params);
    return member;
}

} // namespace

TrainedMember train_member(const std::vector<TrainingInstance>& instances,
                           const ModelConfig& config, std::uint64_t seed,
                           const NormalizationStats& stats,
                           const std::map<Fips, Eigen::VectorXd>* statics) {
    config.validate();
    return train_member_prepared(prepare(instances, config, stats, statics), config, seed);
}

TrainedMember train_member(const std::vector<TrainingInstance>& instances,
                           const ModelConfig& config, std::uint64_t seed) {
    return train_member(instances, config, seed, fit_normalizer(instances));
}

Ensemble train_ensemble(const std::vector<TrainingInstance>& instances, const ModelConfig& config,
                        const std::map<Fips, Eigen::VectorXd>* statics) {
    config.validate();
    Ensemble ensemble;
    ensemble.config = config;
    ensemble.stats = fit_normalizer(instances);
    const PreparedData data = prepare(instances, config, ensemble.stats, statics);

    const unsigned hw = std::max(1u, std::thread::hardware_concurrency());
    const int workers = static_cast<int>(std::min<unsigned>(hw, static_cast<unsigned>(config.ensemble_size)));
    ensemble.members.resize(static_cast<std::size_t>(config.ensemble_size));
    if (workers <= 1) {
        for (int k = 0; k < config.ensemble_size; ++k) {
            ensemble.members[static_cast<std::size_t>(k)] =
                train_member_prepared(data, config, config.seed + static_cast<std::uint64_t>(k));
        }
    } else {
        std::vector<std::future<TrainedMember>> futures;
        futures.reserve(static_cast<std::size_t>(config.ensemble_size));
        for (int k = 0; k < config.ensemble_size; ++k) {
            futures.push_back(std::async(std::launch::async, [&data, &config, k]() {
                return train_member_prepared(data, config,
                                             config.seed + static_cast<std::uint64_t>(k));
            }));
        }
        for (int k = 0; k < config.ensemble_size; ++k) {
            ensemble.members[static_cast<std::size_t>(k)] = futures[static_cast<std::size_t>(k)].get();
        }
    }
    return ensemble;
}

void ForecastSet::merge(const ForecastSet& other) {
    for (const auto& [key, entry] : other.entries) {
        if (!entries.emplace(key, entry).second) {
            throw InternalError("duplicate forecast entry for " + fips_code(key.location));
        }
    }
}

void ForecastSet::validate() const {
    for (const auto& [key, entry] : entries) {
        if (!(entry.point >= 0.0)) {
            throw InternalError("negative point forecast for " + fips_code(key.location));
        }
        if (entry.quantiles) {
            double prev = -1.0;
            for (const double q : *entry.quantiles) {
                if (!(q >= 0.0) || q < prev) {
                    throw InternalError("quantile violation for " + fips_code(key.location));
                }
                prev = q;
            }
        }
    }
}

namespace {

// Runs every member on one county window; returns outputs (members x out_dim),
// denormalized.
Eigen::MatrixXd member_outputs(const Ensemble& ensemble, const Eigen::MatrixXd& window,
                               const Eigen::VectorXd* static_vec) {
    const auto& config = ensemble.config;
    const int T = static_cast<int>(window.rows());
    if (T != config.lag + 1 || window.cols() != config.input_channels) {
        throw ShapeError("inference window does not match lag/channels");
    }
    const Eigen::MatrixXd norm = apply_normalizer(ensemble.stats, window);
    std::vector<nn::Matrix> x_seq(static_cast<std::size_t>(T));
    for (int t = 0; t < T; ++t) x_seq[static_cast<std::size_t>(t)] = norm.row(t).transpose();
    nn::Matrix statics;
    if (config.hybrid) {
        if (static_vec == nullptr) throw InputError("hybrid prediction requires static attributes");
        statics = *static_vec;
    }

    Eigen::MatrixXd out(static_cast<Eigen::Index>(ensemble.members.size()), config.output_dim);
    for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
        const nn::Matrix y =
            nn::forward(ensemble.members[m].net, x_seq, config.hybrid ? &statics : nullptr);
        for (int k = 0; k < config.output_dim; ++k) {
            out(static_cast<Eigen::Index>(m), k) =
                ensemble.stats.target_mean + ensemble.stats.target_sd * y(k, 0);
        }
    }
    return out;
}

const Eigen::VectorXd* find_static(const std::map<Fips, Eigen::VectorXd>* statics, Fips fips) {
    if (statics == nullptr) return nullptr;
    auto it = statics->find(fips);
    return it == statics->end() ? nullptr : &it->second;
}

} // namespace

ForecastSet predict_point(const Ensemble& ensemble, const std::map<Fips, Eigen::MatrixXd>& windows,
                          Date forecast_date, const std::map<Fips, Eigen::VectorXd>* statics) {
    if (ensemble.config.output_dim != 1) {
        throw InputError("predict_point requires a point-head ensemble");
    }
    ForecastSet set;
    for (const auto& [fips, window] : windows) {
        const Eigen::MatrixXd outs = member_outputs(ensemble, window, find_static(statics, fips));
        std::vector<double> values(outs.data(), outs.data() + outs.rows());
        ForecastEntry entry;
        entry.point = std::max(0.0, median(std::move(values)));
        set.entries[{forecast_date, fips, ensemble.config.horizon}] = entry;
    }
    return set;
}

ForecastSet predict_quantiles(const Ensemble& ensemble,
                              const std::map<Fips, Eigen::MatrixXd>& windows, Date forecast_date,
                              const std::map<Fips, Eigen::VectorXd>* statics) {
    if (ensemble.config.output_dim != 7) {
        throw InputError("predict_quantiles requires a quantile-head ensemble");
    }
    ForecastSet set;
    for (const auto& [fips, window] : windows) {
        const Eigen::MatrixXd outs = member_outputs(ensemble, window, find_static(statics, fips));
        std::array<double, 7> qs{};
        for (int k = 0; k < 7; ++k) {
            std::vector<double> column(static_cast<std::size_t>(outs.rows()));
            for (Eigen::Index m = 0; m < outs.rows(); ++m) {
                column[static_cast<std::size_t>(m)] = outs(m, k);
            }
            qs[static_cast<std::size_t>(k)] = median(std::move(column));
        }
        std::sort(qs.begin(), qs.end());  // repair any crossing
        for (double& q : qs) q = std::max(0.0, q);
        ForecastEntry entry;
        entry.point = qs[3];
        entry.quantiles = qs;
        set.entries[{forecast_date, fips, ensemble.config.horizon}] = entry;
    }
    return set;
}

ForecastSet persistence_baseline(const FeatureTable& table, const EpiWeek& as_of,
                                 const std::vector<int>& horizons) {
    ForecastSet set;
    const int idx = table.week_index(as_of);
    if (idx < 0) throw MissingDataError("week " + as_of.label() + " not covered by feature table");
    for (const auto& [fips, rows] : table.counties) {
        const double current = rows.incidence[idx];
        if (std::isnan(current)) {
            throw MissingDataError("county " + fips_code(fips) + " has no incidence in week " +
                                   as_of.label());
        }
        for (const int h : horizons) {
            ForecastEntry entry;
            entry.point = current;
            entry.quantiles = {current, current, current, current, current, current, current};
            set.entries[{as_of.end(), fips, h}] = entry;
        }
    }
    return set;
}

void fit_static_stats(const CountyPanel& panel, NormalizationStats& stats) {
    std::vector<const CountyRecord*> complete;
    for (const auto& [fips, rec] : panel.counties) {
        if (rec.has_all_attrs()) complete.push_back(&rec);
    }
    if (complete.size() < 2) {
        throw InputError("hybrid model needs at least 2 counties with full static attributes");
    }
    stats.static_mean = Eigen::VectorXd::Zero(kStaticAttrCount);
    stats.static_sd = Eigen::VectorXd::Zero(kStaticAttrCount);
    for (const auto* rec : complete) stats.static_mean += rec->attrs.matrix();
    stats.static_mean /= static_cast<double>(complete.size());
    for (const auto* rec : complete) {
        stats.static_sd += (rec->attrs.matrix() - stats.static_mean).cwiseAbs2();
    }
    stats.static_sd = (stats.static_sd / static_cast<double>(complete.size())).cwiseSqrt();
    for (int k = 0; k < kStaticAttrCount; ++k) {
        if (!(stats.static_sd[k] > 0.0)) {
            throw InputError(std::string("constant static attribute: ") +
                             std::string(kStaticAttrNames[static_cast<std::size_t>(k)]));
        }
    }
}

std::map<Fips, Eigen::VectorXd> normalized_statics(const CountyPanel& panel,
                                                   const NormalizationStats& stats) {
    if (stats.static_mean.size() != kStaticAttrCount) {
        throw InputError("static stats not fitted");
    }
    std::map<Fips, Eigen::VectorXd> out;
    for (const auto& [fips, rec] : panel.counties) {
        if (!rec.has_all_attrs()) continue;
        out[fips] =
            (rec.attrs.matrix() - stats.static_mean).cwiseQuotient(stats.static_sd);
    }
    return out;
}

namespace {

constexpr int kEnsembleFormatVersion = 1;

nlohmann::json vector_json(const Eigen::VectorXd& v) {
    nlohmann::json arr = nlohmann::json::array();
    for (Eigen::Index i = 0; i < v.size(); ++i) arr.push_back(v[i]);
    return arr;
}

Eigen::VectorXd vector_from_json(const nlohmann::json& arr) {
    Eigen::VectorXd v(static_cast<Eigen::Index>(arr.size()));
    for (std::size_t i = 0; i < arr.size(); ++i) v[static_cast<Eigen::Index>(i)] = arr[i].get<double>();
    return v;
}

} // namespace

void save_ensemble(const Ensemble& ensemble, const std::string& dir) {
    namespace fs = std::filesystem;
    fs::create_directories(dir);
    nlohmann::json manifest;
    manifest["format_version"] = kEnsembleFormatVersion;
    manifest["gate_order"] = nn::kGateOrder;
    const auto& c = ensemble.config;
    manifest["config"] = {
        {"input_channels", c.input_channels}, {"lstm_units", c.lstm_units},
        {"dense_units", c.dense_units},       {"output_dim", c.output_dim},
        {"lag", c.lag},                       {"horizon", c.horizon},
        {"epochs", c.epochs},                 {"learning_rate", c.learning_rate},
        {"ensemble_size", c.ensemble_size},   {"batch_size", c.batch_size},
        {"seed", c.seed},                     {"hybrid", c.hybrid},
        {"static_dim", c.static_dim},
    };
    manifest["stats"] = {
        {"mean", vector_json(ensemble.stats.mean)},
        {"stddev", vector_json(ensemble.stats.stddev)},
        {"target_mean", ensemble.stats.target_mean},
        {"target_sd", ensemble.stats.target_sd},
        {"static_mean", vector_json(ensemble.stats.static_mean)},
        {"static_sd", vector_json(ensemble.stats.static_sd)},
    };
    nlohmann::json members = nlohmann::json::array();
    for (std::size_t m = 0; m < ensemble.members.size(); ++m) {
        const std::string file = "member_" + std::to_string(m) + ".weights";
        nn::save_network(ensemble.members[m].net, dir + "/" + file);
        members.push_back({{"file", file},
                           {"seed", ensemble.members[m].seed},
                           {"best_epoch", ensemble.members[m].best_epoch},
                           {"epoch_losses", ensemble.members[m].epoch_losses}});
    }
    manifest["members"] = members;
    std::ofstream out(dir + "/manifest.json", std::ios::trunc);
    if (!out) throw InputError("cannot write ensemble manifest in " + dir);
    out << manifest.dump(2) << '\n';
}

Ensemble load_ensemble(const std::string& dir) {
    std::ifstream in(dir + "/manifest.json");
    if (!in) throw InputError("cannot open ensemble manifest in " + dir);
    nlohmann::json manifest;
    in >> manifest;
    if (manifest.value("format_version", -1) != kEnsembleFormatVersion) {
        throw InputError("ensemble format version mismatch in " + dir);
    }
    Ensemble ensemble;
    const auto& c = manifest.at("config");
    ensemble.config.input_channels = c.at("input_channels").get<int>();
    ensemble.config.lstm_units = c.at("lstm_units").get<std::vector<int>>();
    ensemble.config.dense_units = c.at("dense_units").get<int>();
    ensemble.config.output_dim = c.at("output_dim").get<int>();
    ensemble.config.lag = c.at("lag").get<int>();
    ensemble.config.horizon = c.at("horizon").get<int>();
    ensemble.config.epochs = c.at("epochs").get<int>();
    ensemble.config.learning_rate = c.at("learning_rate").get<double>();
    ensemble.config.ensemble_size = c.at("ensemble_size").get<int>();
    ensemble.config.batch_size = c.at("batch_size").get<int>();
    ensemble.config.seed = c.at("seed").get<std::uint64_t>();
    ensemble.config.hybrid = c.at("hybrid").get<bool>();
    ensemble.config.static_dim = c.at("static_dim").get<int>();

    const auto& s = manifest.at("stats");
    ensemble.stats.mean = vector_from_json(s.at("mean"));
    ensemble.stats.stddev = vector_from_json(s.at("stddev"));
    ensemble.stats.target_mean = s.at("target_mean").get<double>();
    ensemble.stats.target_sd = s.at("target_sd").get<double>();
    ensemble.stats.static_mean = vector_from_json(s.at("static_mean"));
    ensemble.stats.static_sd = vector_from_json(s.at("static_sd"));

    for (const auto& m : manifest.at("members")) {
        TrainedMember member;
        member.net = nn::load_network(dir + "/" + m.at("file").get<std::string>());
        member.seed = m.at("seed").get<std::uint64_t>();
        member.best_epoch = m.at("best_epoch").get<int>();
        member.epoch_losses = m.at("epoch_losses").get<std::vector<double>>();
        ensemble.members.push_back(std::move(member));
    }
    if (static_cast<int>(ensemble.members.size()) != ensemble.config.ensemble_size) {
        throw InputError("ensemble member count does not match config in " + dir);
    }
    return ensemble;
}

std::vector<LagSweepRow> lag_sweep(const FeatureTable& table, const std::vector<int>& lags,
                                   ModelConfig config, int eval_weeks) {
    if (eval_weeks < 1) throw InputError("lag sweep needs at least one evaluation week");
    if (table.weeks.empty()) throw InputError("empty feature table");
    const int n_weeks = static_cast<int>(table.weeks.size());
    std::vector<LagSweepRow> rows;

    for (const int lag : lags) {
        // Training cut: the last anchor whose target precedes every
        // evaluation target.
        const int first_eval = n_weeks - eval_weeks - config.horizon;
        if (first_eval - 1 < lag + config.horizon || lag < 0) {
            log::warn("lag ", lag, " skipped: insufficient history");
            continue;
        }
        ModelConfig cfg = config;
        cfg.lag = lag;
        const EpiWeek train_as_of = table.weeks[static_cast<std::size_t>(first_eval - 1)];
        WindowSet train_ws = make_windows(table, lag, cfg.horizon, train_as_of);
        if (train_ws.training.empty()) {
            log::warn("lag ", lag, " skipped: no usable training instances");
            continue;
        }
        const Ensemble ensemble = train_ensemble(train_ws.training, cfg);

        double mae_sum = 0.0;
        int scored_weeks = 0;
        for (int e = 0; e < eval_weeks; ++e) {
            const int anchor = first_eval + e;
            const EpiWeek anchor_week = table.weeks[static_cast<std::size_t>(anchor)];
            WindowSet ws = make_windows(table, lag, cfg.horizon, anchor_week);
            const ForecastSet forecasts =
                predict_point(ensemble, ws.inference, anchor_week.end());
            double err = 0.0;
            int n = 0;
            const EpiWeek target_week = anchor_week + cfg.horizon;
            for (const auto& [key, entry] : forecasts.entries) {
                const auto truth = table.incidence_at(key.location, target_week);
                if (!truth) continue;
                err += std::abs(entry.point - *truth);
                ++n;
            }
            if (n > 0) {
                mae_sum += err / n;
                ++scored_weeks;
            }
        }
        if (scored_weeks == 0) {
            log::warn("lag ", lag, " skipped: no overlapping truth");
            continue;
        }
        rows.push_back({lag, mae_sum / scored_weeks, scored_weeks});
    }
    return rows;
}

} // namespace countycast
