// countycast: county-level epidemic forecasting pipeline.
//
// Subcommands wire ingestion -> features -> training -> forecasting ->
// evaluation. Exit codes: 0 success, 1 internal error, 2 usage/input error.

#include <CLI11.hpp>

#include <fcntl.h>
#include <unistd.h>

#include <filesystem>
#include <fstream>
#include <iostream>
#include <set>
#include <sstream>

#include "countycast/csv.hpp"
#include "countycast/errors.hpp"
#include "countycast/evaluation.hpp"
#include "countycast/features.hpp"
#include "countycast/forecaster.hpp"
#include "countycast/hash.hpp"
#include "countycast/hub_format.hpp"
#include "countycast/ingest.hpp"
#include "countycast/log.hpp"

namespace fs = std::filesystem;
using namespace countycast;

namespace {

struct RunConfig {
    // data sources
    std::string cases, mobility, sci, statics, weather;
    std::string snapshot;
    // run parameters
    std::string as_of;
    int lag = 9;
    std::string horizons = "1,2,3,4";
    int ensemble_size = 10;
    int epochs = 15;
    double learning_rate = 1e-3;
    int batch_size = 32;
    std::uint64_t seed = 1;
    bool quantiles = false;
    bool hybrid = false;
    std::string truth = "raw";
    std::string output = ".";
    int eval_weeks = 1;
    std::string reference;
    bool no_cache = false;
};

// Flat key=value configuration ('#' comments). Values become defaults; command
// line flags override them.
std::map<std::string, std::string> read_flat_config(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw UsageError("cannot open config file: " + path);
    std::map<std::string, std::string> kv;
    std::string line;
    int lineno = 0;
    while (std::getline(in, line)) {
        ++lineno;
        const auto hash = line.find('#');
        if (hash != std::string::npos) line.erase(hash);
        const auto first = line.find_first_not_of(" \t\r");
        if (first == std::string::npos) continue;
        const auto last = line.find_last_not_of(" \t\r");
        line = line.substr(first, last - first + 1);
        const auto eq = line.find('=');
        if (eq == std::string::npos) {
            throw UsageError("config line " + std::to_string(lineno) + " is not key=value");
        }
        auto trim = [](std::string s) {
            const auto b = s.find_first_not_of(" \t");
            const auto e = s.find_last_not_of(" \t");
            return b == std::string::npos ? std::string() : s.substr(b, e - b + 1);
        };
        kv[trim(line.substr(0, eq))] = trim(line.substr(eq + 1));
    }
    return kv;
}

void apply_flat_config(RunConfig& cfg, const std::map<std::string, std::string>& kv) {
    auto want_int = [](const std::string& k, const std::string& v) {
        const auto n = csv::parse_int(v);
        if (!n) throw UsageError("config key " + k + " expects an integer, got '" + v + "'");
        return *n;
    };
    auto want_double = [](const std::string& k, const std::string& v) {
        const auto n = csv::parse_double(v);
        if (!n) throw UsageError("config key " + k + " expects a number, got '" + v + "'");
        return *n;
    };
    auto want_bool = [](const std::string& k, const std::string& v) {
        if (v == "true" || v == "1" || v == "yes") return true;
        if (v == "false" || v == "0" || v == "no") return false;
        throw UsageError("config key " + k + " expects a boolean, got '" + v + "'");
    };
    for (const auto& [k, v] : kv) {
        if (k == "cases") cfg.cases = v;
        else if (k == "mobility") cfg.mobility = v;
        else if (k == "sci") cfg.sci = v;
        else if (k == "static") cfg.statics = v;
        else if (k == "weather") cfg.weather = v;
        else if (k == "snapshot") cfg.snapshot = v;
        else if (k == "as_of") cfg.as_of = v;
        else if (k == "lag") cfg.lag = static_cast<int>(want_int(k, v));
        else if (k == "horizons") cfg.horizons = v;
        else if (k == "ensemble_size") cfg.ensemble_size = static_cast<int>(want_int(k, v));
        else if (k == "epochs") cfg.epochs = static_cast<int>(want_int(k, v));
        else if (k == "learning_rate") cfg.learning_rate = want_double(k, v);
        else if (k == "batch_size") cfg.batch_size = static_cast<int>(want_int(k, v));
        else if (k == "seed") cfg.seed = static_cast<std::uint64_t>(want_int(k, v));
        else if (k == "quantiles") cfg.quantiles = want_bool(k, v);
        else if (k == "hybrid") cfg.hybrid = want_bool(k, v);
        else if (k == "truth") cfg.truth = v;
        else if (k == "output") cfg.output = v;
        else if (k == "eval_weeks") cfg.eval_weeks = static_cast<int>(want_int(k, v));
        else if (k == "reference") cfg.reference = v;
        else throw UsageError("unknown config key: " + k);
    }
}

// Serialized lock on the output directory; concurrent runs against the same
// directory are refused.
class OutputLock {
public:
    explicit OutputLock(const std::string& dir) {
        fs::create_directories(dir);
        path_ = dir + "/.countycast.lock";
        const int fd = ::open(path_.c_str(), O_CREAT | O_EXCL | O_WRONLY, 0644);
        if (fd < 0) {
            throw InputError("output directory is locked by another run: " + path_ +
                             " (remove the lock file if that run is gone)");
        }
        const std::string pid = "pid=" + std::to_string(::getpid()) + "\n";
        [[maybe_unused]] const auto n = ::write(fd, pid.data(), pid.size());
        ::close(fd);
        held_ = true;
    }
    ~OutputLock() {
        if (held_) {
            std::error_code ec;
            fs::remove(path_, ec);
        }
    }
    OutputLock(const OutputLock&) = delete;
    OutputLock& operator=(const OutputLock&) = delete;

private:
    std::string path_;
    bool held_ = false;
};

std::string read_file_bytes(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in) throw InputError("cannot open " + path);
    std::ostringstream os;
    os << in.rdbuf();
    return os.str();
}

void require_file(const std::string& path, const std::string& what) {
    if (path.empty()) throw UsageError("missing required path for " + what);
    if (!fs::exists(path)) throw InputError("cannot find " + what + " file: " + path);
}

std::vector<int> parse_horizons(const std::string& text) {
    std::vector<int> out;
    std::stringstream ss(text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto h = csv::parse_int(part);
        if (!h || *h < 1 || *h > 4) throw UsageError("horizons must be integers in 1..4");
        out.push_back(static_cast<int>(*h));
    }
    if (out.empty()) throw UsageError("no horizons given");
    std::sort(out.begin(), out.end());
    out.erase(std::unique(out.begin(), out.end()), out.end());
    return out;
}

// as_of must be a Saturday (an epi-week end); anything else snaps down to the
// preceding Saturday with a warning.
EpiWeek resolve_as_of(const std::string& text) {
    const auto parsed = Date::parse_iso(text);
    if (!parsed) throw UsageError("as_of must be YYYY-MM-DD, got '" + text + "'");
    Date d = *parsed;
    if (d.weekday_sun0() != 6) {
        const Date snapped = d - ((d.weekday_sun0() + 1) % 7);
        log::warn("as_of ", d.to_iso(), " is not a Saturday; snapping to ", snapped.to_iso());
        d = snapped;
    }
    return epiweek_of(d);
}

std::string config_fingerprint(const RunConfig& cfg, int horizon, int output_dim) {
    std::ostringstream os;
    os << "lag=" << cfg.lag << ";horizon=" << horizon << ";out=" << output_dim
       << ";ensemble=" << cfg.ensemble_size << ";epochs=" << cfg.epochs
       << ";lr=" << csv::format_double(cfg.learning_rate) << ";batch=" << cfg.batch_size
       << ";seed=" << cfg.seed << ";hybrid=" << (cfg.hybrid ? 1 : 0);
    return os.str();
}

std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof(buf), "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

ModelConfig model_config_from(const RunConfig& cfg, int horizon, int output_dim) {
    ModelConfig mc;
    mc.lag = cfg.lag;
    mc.horizon = horizon;
    mc.output_dim = output_dim;
    mc.epochs = cfg.epochs;
    mc.learning_rate = cfg.learning_rate;
    mc.ensemble_size = cfg.ensemble_size;
    mc.batch_size = cfg.batch_size;
    mc.seed = cfg.seed;
    mc.hybrid = cfg.hybrid;
    mc.static_dim = cfg.hybrid ? kStaticAttrCount : 0;
    mc.validate();
    return mc;
}

int cmd_ingest(const RunConfig& cfg) {
    require_file(cfg.cases, "cases");
    require_file(cfg.mobility, "mobility");
    require_file(cfg.sci, "sci");
    require_file(cfg.statics, "static attributes");
    require_file(cfg.weather, "weather");
    if (cfg.snapshot.empty()) throw UsageError("ingest needs --snapshot output path");

    IngestReport report;
    const CasesPartial cases = load_cases(cfg.cases, report);
    const MovementPartial movement = load_movement(cfg.mobility, report);
    const ConnectednessGraph graph = load_sci(cfg.sci, report);
    const StaticPartial statics = load_static(cfg.statics, report);
    const WeatherPartial weather = load_weather(cfg.weather, report);
    const CountyPanel panel = assemble_panel(cases, movement, statics, weather, graph, report);

    if (const auto parent = fs::path(cfg.snapshot).parent_path(); !parent.empty()) {
        fs::create_directories(parent);
    }
    write_snapshot(panel, graph, cfg.snapshot);

    std::ofstream rep(cfg.snapshot + ".report.txt", std::ios::trunc);
    rep << report.summary();
    for (const auto& a : report.anomalies) rep << "anomaly: " << a << '\n';
    for (const auto& d : report.dropped_counties) rep << "dropped: " << d << '\n';
    std::cout << report.summary();
    log::info("snapshot written to ", cfg.snapshot, " (", panel.counties.size(), " counties, ",
              panel.num_days(), " days)");
    return 0;
}

int cmd_features(const RunConfig& cfg, const std::string& out_path) {
    require_file(cfg.snapshot, "snapshot");
    auto [panel, graph] = read_snapshot(cfg.snapshot);
    const FeatureTable table = build_feature_table(panel, graph);
    write_feature_csv(table, out_path);
    log::info("feature table written to ", out_path);
    return 0;
}

// Trains (or loads from cache) one ensemble for the given head/horizon.
Ensemble obtain_ensemble(const RunConfig& cfg, const WindowSet& windows, int horizon,
                         int output_dim, std::uint64_t snapshot_hash,
                         const std::map<Fips, Eigen::VectorXd>* statics,
                         const NormalizationStats* static_stats) {
    const ModelConfig mc = model_config_from(cfg, horizon, output_dim);
    const std::string fingerprint = config_fingerprint(cfg, horizon, output_dim);
    const std::string key = hash_hex(fnv1a64(fingerprint, snapshot_hash));
    const std::string cache_dir = cfg.output + "/cache/" + key;
    if (!cfg.no_cache && fs::exists(cache_dir + "/manifest.json")) {
        log::info("loading cached ensemble ", key, " (horizon ", horizon, ", head ", output_dim,
                  ")");
        return load_ensemble(cache_dir);
    }
    log::info("training ensemble for horizon ", horizon, ", head width ", output_dim, " (",
              windows.training.size(), " instances)");
    Ensemble ensemble = train_ensemble(windows.training, mc, statics);
    if (static_stats != nullptr) {
        ensemble.stats.static_mean = static_stats->static_mean;
        ensemble.stats.static_sd = static_stats->static_sd;
    }
    if (!cfg.no_cache) save_ensemble(ensemble, cache_dir);
    return ensemble;
}

int cmd_forecast(const RunConfig& cfg) {
    require_file(cfg.snapshot, "snapshot");
    if (cfg.as_of.empty()) throw UsageError("forecast needs --as-of");
    if (cfg.eval_weeks < 1) throw UsageError("--eval-weeks must be >= 1");
    OutputLock lock(cfg.output);

    auto [panel, graph] = read_snapshot(cfg.snapshot);
    const std::uint64_t snapshot_hash = fnv1a64(read_file_bytes(cfg.snapshot));
    const FeatureTable table = build_feature_table(panel, graph);
    const EpiWeek as_of = resolve_as_of(cfg.as_of);
    const std::vector<int> horizons = parse_horizons(cfg.horizons);
    const int max_horizon = horizons.back();

    const int as_of_idx = table.week_index(as_of);
    if (as_of_idx < 0) {
        throw InputError("as_of week " + as_of.label() + " is outside the snapshot range " +
                         panel.first.to_iso() + ".." + panel.last.to_iso());
    }
    // Rows become defined only after the smoothing warm-up week, the monthly
    // window and the change features; training also needs lag+1 rows and an
    // observed target.
    const int required = cfg.lag + max_horizon + 4 + 1;
    if (as_of_idx < required) {
        throw InputError("history too short: as_of week index " + std::to_string(as_of_idx) +
                         " but lag " + std::to_string(cfg.lag) + " + horizon " +
                         std::to_string(max_horizon) + " + monthly window needs >= " +
                         std::to_string(required) + " weeks before as_of");
    }

    NormalizationStats static_stats;
    std::map<Fips, Eigen::VectorXd> statics;
    if (cfg.hybrid) {
        fit_static_stats(panel, static_stats);
        statics = normalized_statics(panel, static_stats);
    }

    struct HorizonModels {
        Ensemble point;
        std::optional<Ensemble> quantile;
    };
    std::map<int, HorizonModels> models;
    for (const int h : horizons) {
        const WindowSet windows = make_windows(table, cfg.lag, h, as_of);
        if (windows.training.empty()) {
            throw InputError("no usable training instances for horizon " + std::to_string(h));
        }
        HorizonModels& hm = models[h];
        hm.point = obtain_ensemble(cfg, windows, h, 1, snapshot_hash,
                                   cfg.hybrid ? &statics : nullptr,
                                   cfg.hybrid ? &static_stats : nullptr);
        if (cfg.quantiles) {
            hm.quantile = obtain_ensemble(cfg, windows, h, 7, snapshot_hash,
                                          cfg.hybrid ? &statics : nullptr,
                                          cfg.hybrid ? &static_stats : nullptr);
        }
    }

    // One submission file per anchor week; later anchors reuse the trained
    // ensembles with windows ending at that anchor.
    for (int e = 0; e < cfg.eval_weeks; ++e) {
        const EpiWeek anchor = as_of + e;
        if (table.week_index(anchor) < 0) {
            throw InputError("anchor week " + anchor.label() + " beyond snapshot range");
        }
        ForecastSet combined;
        for (const int h : horizons) {
            const WindowSet ws = make_windows(table, cfg.lag, h, anchor);
            auto& hm = models.at(h);
            ForecastSet points = predict_point(hm.point, ws.inference, anchor.end(),
                                               cfg.hybrid ? &statics : nullptr);
            if (hm.quantile) {
                const ForecastSet qs = predict_quantiles(*hm.quantile, ws.inference, anchor.end(),
                                                         cfg.hybrid ? &statics : nullptr);
                for (auto& [key, entry] : points.entries) {
                    auto it = qs.entries.find(key);
                    if (it != qs.entries.end()) entry.quantiles = it->second.quantiles;
                }
            }
            combined.merge(points);
        }
        combined.validate();
        const std::string path = cfg.output + "/" + anchor.end().to_iso() + "-countycast.csv";
        write_hub_csv(combined, path, cfg.quantiles);
        log::info("wrote ", path);
    }
    return 0;
}

int cmd_evaluate(const RunConfig& cfg, const std::vector<std::string>& forecast_files) {
    require_file(cfg.snapshot, "snapshot");
    if (forecast_files.empty()) throw UsageError("evaluate needs at least one forecast file");
    OutputLock lock(cfg.output);

    auto [panel, graph] = read_snapshot(cfg.snapshot);
    const FeatureTable table = build_feature_table(panel, graph);
    const std::set<Fips> top50 = top_k_by_population(panel, 50);

    std::vector<TruthMode> modes;
    if (cfg.truth == "raw") modes = {TruthMode::kRaw};
    else if (cfg.truth == "smoothed") modes = {TruthMode::kSmoothed};
    else if (cfg.truth == "both") modes = {TruthMode::kRaw, TruthMode::kSmoothed};
    else throw UsageError("truth must be raw, smoothed or both");

    // Model label = file stem, minus the customary YYYY-MM-DD- prefix so a
    // model's weekly files aggregate into one period report.
    std::map<std::string, ForecastSet> sets;
    for (const auto& file : forecast_files) {
        require_file(file, "forecast");
        std::string label = fs::path(file).stem().string();
        if (label.size() > 11 && Date::parse_iso(label.substr(0, 10)) && label[10] == '-') {
            label = label.substr(11);
        }
        try {
            sets[label].merge(read_hub_csv(file));
        } catch (const InternalError&) {
            throw InputError("forecast files for model '" + label +
                             "' contain duplicate (date, location, horizon) entries");
        }
    }

    // Persistence baseline on the fly at every forecast date present.
    std::set<std::pair<Date, int>> cells;
    for (const auto& [label, set] : sets) {
        for (const auto& [key, entry] : set.entries) cells.insert({key.forecast_date, key.horizon});
    }
    ForecastSet baseline;
    std::set<Date> dates;
    std::vector<int> horizons_seen;
    for (const auto& [date, horizon] : cells) {
        dates.insert(date);
        horizons_seen.push_back(horizon);
    }
    std::sort(horizons_seen.begin(), horizons_seen.end());
    horizons_seen.erase(std::unique(horizons_seen.begin(), horizons_seen.end()),
                        horizons_seen.end());
    for (const Date date : dates) {
        const EpiWeek week = epiweek_of(date);
        if (table.week_index(week) < 0) continue;
        baseline.merge(persistence_baseline(table, week, horizons_seen));
    }
    if (!baseline.entries.empty()) sets["persistence-baseline"] = std::move(baseline);

    std::vector<ReferenceScore> references;
    if (!cfg.reference.empty()) {
        require_file(cfg.reference, "reference scores");
        references = load_reference_scores(cfg.reference);
    }

    std::vector<EvalReport> reports;
    for (const TruthMode mode : modes) {
        const GroundTruth truth = build_truth(panel, mode);
        for (const auto& [label, set] : sets) {
            // Skip cells whose target week is outside the truth span.
            ForecastSet in_range;
            for (const auto& [key, entry] : set.entries) {
                const EpiWeek target = epiweek_of(key.forecast_date) + key.horizon;
                bool covered = false;
                for (const auto& [fips, values] : truth.values) {
                    if (truth.value(fips, target)) {
                        covered = true;
                        break;
                    }
                }
                if (covered) in_range.entries.emplace(key, entry);
            }
            if (in_range.entries.empty()) continue;
            reports.push_back(evaluate_model(label, in_range, truth, top50));
        }

        // Plot-ready national aggregation per model and horizon.
        for (const auto& [label, set] : sets) {
            std::ofstream nat(cfg.output + "/national-" + label + "-" + truth_mode_name(mode) +
                                  ".csv",
                              std::ios::trunc);
            nat << "forecast_date,horizon,national_forecast,national_truth\n";
            for (const int h : horizons_seen) {
                for (const auto& point : aggregate_national(set, truth, h)) {
                    nat << point.forecast_date.to_iso() << ',' << h << ','
                        << csv::format_double(point.forecast_total) << ','
                        << csv::format_double(point.truth_total) << '\n';
                }
            }
        }
    }
    if (reports.empty()) {
        throw InputError("no overlapping weeks between forecasts and snapshot truth");
    }
    const std::string report_path = cfg.output + "/eval_report.csv";
    write_eval_report_csv(report_path, reports, references);
    log::info("wrote ", report_path);
    return 0;
}

int cmd_lag_sweep(const RunConfig& cfg, const std::string& lags_text) {
    require_file(cfg.snapshot, "snapshot");
    OutputLock lock(cfg.output);
    auto [panel, graph] = read_snapshot(cfg.snapshot);
    const FeatureTable table = build_feature_table(panel, graph);

    std::vector<int> lags;
    std::stringstream ss(lags_text);
    std::string part;
    while (std::getline(ss, part, ',')) {
        const auto v = csv::parse_int(part);
        if (!v || *v < 0) throw UsageError("lags must be non-negative integers");
        lags.push_back(static_cast<int>(*v));
    }
    if (lags.empty()) throw UsageError("no lags given");

    ModelConfig mc = model_config_from(cfg, parse_horizons(cfg.horizons).front(), 1);
    const auto rows = lag_sweep(table, lags, mc, cfg.eval_weeks);
    if (rows.empty()) throw InputError("no lag produced a result; history too short");

    const std::string path = cfg.output + "/lag_sweep.csv";
    std::ofstream out(path, std::ios::trunc);
    out << "lag,avg_mae,eval_weeks\n";
    for (const auto& row : rows) {
        out << row.lag << ',' << csv::format_double(row.avg_mae) << ',' << row.eval_weeks << '\n';
    }
    log::info("wrote ", path);
    return 0;
}

} // namespace

int main(int argc, char** argv) {
    try {
        // Pre-scan for --config so file values become defaults under the flags.
        RunConfig cfg;
        std::vector<std::string> args(argv + 1, argv + argc);
        for (std::size_t i = 0; i < args.size(); ++i) {
            if (args[i] == "--config" && i + 1 < args.size()) {
                apply_flat_config(cfg, read_flat_config(args[i + 1]));
            } else if (args[i].rfind("--config=", 0) == 0) {
                apply_flat_config(cfg, read_flat_config(args[i].substr(9)));
            }
        }

        CLI::App app{"county-level epidemic forecasting pipeline"};
        app.require_subcommand(1);
        std::string config_path;
        app.add_option("--config", config_path, "flat key=value configuration file");

        auto add_common = [&cfg, &config_path](CLI::App* sub) {
            sub->add_option("--snapshot", cfg.snapshot, "canonical snapshot file");
            sub->add_option("--output", cfg.output, "output directory");
            sub->add_option("--config", config_path,
                            "flat key=value configuration file (applied before flags)");
        };

        CLI::App* ingest = app.add_subcommand("ingest", "parse sources into a snapshot");
        ingest->add_option("--cases", cfg.cases, "cumulative cases CSV");
        ingest->add_option("--mobility", cfg.mobility, "movement-range TSV");
        ingest->add_option("--sci", cfg.sci, "connectedness edge list TSV");
        ingest->add_option("--static", cfg.statics, "county attributes CSV");
        ingest->add_option("--weather", cfg.weather, "daily temperature CSV");
        add_common(ingest);

        CLI::App* features = app.add_subcommand("features", "export the weekly feature table");
        std::string features_out = "features.csv";
        features->add_option("--out", features_out, "feature CSV path");
        add_common(features);

        CLI::App* forecast = app.add_subcommand("forecast", "train and write submission files");
        forecast->add_option("--as-of", cfg.as_of, "forecast date (Saturday, YYYY-MM-DD)");
        forecast->add_option("--lag", cfg.lag, "window length minus one, in weeks");
        forecast->add_option("--horizons", cfg.horizons, "comma list from 1..4");
        forecast->add_option("--ensemble-size", cfg.ensemble_size, "members per ensemble");
        forecast->add_option("--epochs", cfg.epochs, "training epochs");
        forecast->add_option("--learning-rate", cfg.learning_rate, "Adam learning rate");
        forecast->add_option("--batch-size", cfg.batch_size, "mini-batch size");
        forecast->add_option("--seed", cfg.seed, "base RNG seed");
        forecast->add_flag("--quantiles", cfg.quantiles, "also train quantile heads");
        forecast->add_flag("--hybrid", cfg.hybrid, "append static county attributes");
        forecast->add_option("--eval-weeks", cfg.eval_weeks,
                             "write files for this many consecutive anchor weeks");
        forecast->add_flag("--no-cache", cfg.no_cache, "always retrain");
        add_common(forecast);

        CLI::App* evaluate = app.add_subcommand("evaluate", "score forecast files");
        std::vector<std::string> forecast_files;
        evaluate->add_option("forecasts", forecast_files, "forecast CSV files");
        evaluate->add_option("--truth", cfg.truth, "raw | smoothed | both");
        evaluate->add_option("--reference", cfg.reference, "published comparison scores CSV");
        add_common(evaluate);

        CLI::App* sweep = app.add_subcommand("lag-sweep", "average MAE per temporal lag");
        std::string lags_text = "5,6,7,8,9,10";
        sweep->add_option("--lags", lags_text, "comma list of lags");
        sweep->add_option("--horizons", cfg.horizons, "horizon for the sweep (first used)");
        sweep->add_option("--eval-weeks", cfg.eval_weeks, "weeks scored per lag");
        sweep->add_option("--ensemble-size", cfg.ensemble_size, "members per ensemble");
        sweep->add_option("--epochs", cfg.epochs, "training epochs");
        sweep->add_option("--learning-rate", cfg.learning_rate, "Adam learning rate");
        sweep->add_option("--batch-size", cfg.batch_size, "mini-batch size");
        sweep->add_option("--seed", cfg.seed, "base RNG seed");
        add_common(sweep);

        try {
            app.parse(argc, argv);
        } catch (const CLI::ParseError& e) {
            const int code = app.exit(e);
            return code == 0 ? 0 : 2;
        }

        if (ingest->parsed()) return cmd_ingest(cfg);
        if (features->parsed()) return cmd_features(cfg, features_out);
        if (forecast->parsed()) return cmd_forecast(cfg);
        if (evaluate->parsed()) return cmd_evaluate(cfg, forecast_files);
        if (sweep->parsed()) return cmd_lag_sweep(cfg, lags_text);
        throw UsageError("no subcommand given");
    } catch (const InputError& e) {
        log::error(e.what());
        return 2;
    } catch (const std::exception& e) {
        log::error("internal error: ", e.what());
        return 1;
    }
}
