// Command-line front end: every subcommand reads its inputs, runs one library
// pipeline, and lands a report directory with a manifest.  Reruns with the
// same inputs and seed write byte-identical files.
//
// A JSON config file (--config) fills in any option the command line left
// untouched; explicit flags always win.  Exit codes: 0 ok, 2 usage or config
// problem, 3 bad input data, 4 internal failure.

#include <CLI11.hpp>

#include <cmath>
#include <cstdint>
#include <filesystem>
#include <memory>
#include <numeric>
#include <sstream>
#include <string>
#include <vector>

#include "safescore/safescore.hpp"

using namespace safescore;

namespace {

struct ConfigPatch {
    json j = json::object();
    const CLI::App* sub = nullptr;

    static ConfigPatch load(const CLI::App* sub, const std::string& path) {
        ConfigPatch c;
        c.sub = sub;
        if (!path.empty()) {
            c.j = load_json_file(path);
            if (!c.j.is_object()) throw ConfigError("config file must hold a JSON object: " + path);
        }
        return c;
    }

    // Applies config key `key` to `out` unless the flag was given explicitly.
    template <class T>
    void patch(const std::string& flag, const char* key, T& out) const {
        if (sub->get_option(flag)->count() > 0 || !j.contains(key)) return;
        try {
            out = j.at(key).get<T>();
        } catch (const json::exception&) {
            throw ConfigError(std::string("config key '") + key + "' has the wrong type");
        }
    }
};

std::vector<std::uint64_t> parse_seed_list(const std::string& s) {
    std::vector<std::uint64_t> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        try {
            out.push_back(std::stoull(item));
        } catch (const std::exception&) {
            throw ConfigError("bad seed: " + item);
        }
    }
    if (out.empty()) throw ConfigError("empty seed list");
    return out;
}

std::vector<double> parse_double_list(const std::string& s) {
    std::vector<double> out;
    std::stringstream ss(s);
    std::string item;
    while (std::getline(ss, item, ',')) {
        if (item.empty()) continue;
        out.push_back(parse_double(item));
    }
    if (out.empty()) throw ConfigError("empty number list");
    return out;
}

FeatureSchema load_schema_opt(const std::string& path) {
    return path.empty() ? default_schema() : FeatureSchema::load(path);
}

CodeMap load_codes_opt(const std::string& path) {
    return path.empty() ? CodeMap::defaults() : CodeMap::load(path);
}

CalibrationTable load_calibration_opt(const std::string& path) {
    return path.empty() ? CalibrationTable::defaults() : CalibrationTable::load(path);
}

RiskBands load_bands_opt(const std::string& path) {
    if (path.empty()) return RiskBands{};
    RiskBands b = RiskBands::from_json(load_json_file(path));
    b.validate();
    return b;
}

// Accepts either the labeled dataset layout or the bare feature layout
// (id + one column per schema feature).
void load_context_batch(const std::string& path, const FeatureSchema& schema,
                        std::vector<std::string>& ids, std::vector<DrivingContext>& contexts) {
    const CsvTable t = load_csv(path);
    std::vector<std::string> bare{"id"};
    for (const auto& f : schema.features()) bare.push_back(f.name);
    std::vector<std::string> labeled = bare;
    labeled.push_back("label");
    labeled.push_back("provenance");
    if (t.header != bare && t.header != labeled)
        throw DataError(path + ": header matches neither the feature nor the labeled layout of " +
                        schema.id());
    for (const auto& row : t.rows) {
        DrivingContext ctx;
        ctx.schema_id = schema.id();
        ctx.values.reserve(schema.size());
        for (std::size_t i = 0; i < schema.size(); ++i) ctx.values.push_back(parse_double(row[i + 1]));
        ids.push_back(row[0]);
        contexts.push_back(std::move(ctx));
    }
}

std::string penalties_cell(const SafetyAssessment& a) {
    std::string s;
    for (const auto& p : a.applied_penalties) {
        if (!s.empty()) s += ";";
        s += p.rule_id + "=" + fmt_double(p.alpha);
    }
    return s;
}

// ---------------------------------------------------------------------------
// ingest
// ---------------------------------------------------------------------------

struct IngestOpts {
    std::string input, out, config, schema_path, codes_path;
};

void run_ingest(IngestOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--schema", "schema", o.schema_path);
    cfg.patch("--codes", "codes", o.codes_path);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const CodeMap codes = load_codes_opt(o.codes_path);
    FeatureEngineer engineer(schema, codes);

    IngestReport report;
    const auto records = load_crash_records(o.input, schema.raw_columns(), report);
    const auto contexts = engineer.engineer_all(records, &report);
    log_info("ingested " + std::to_string(report.rows_kept) + " of " +
             std::to_string(report.rows_read) + " rows");

    std::vector<std::string> header{"id"};
    for (const auto& f : schema.features()) header.push_back(f.name);
    CsvWriter w(header);
    for (std::size_t i = 0; i < records.size(); ++i) {
        std::vector<std::string> row{records[i].casenum};
        for (double v : contexts[i].values) row.push_back(fmt_double(v));
        w.append_row(row);
    }

    ReportWriter rw(o.out);
    rw.stage_csv("features.csv", w);
    rw.stage_json("ingest_report.json", report.to_json());
    rw.commit("ingest", 0,
              json{{"input", o.input}, {"schema", schema.id()}, {"rows_kept", report.rows_kept}});
}

// ---------------------------------------------------------------------------
// synth
// ---------------------------------------------------------------------------

struct SynthOpts {
    std::string input, out, config, schema_path, codes_path, rates_path;
    std::uint64_t seed = 42;
    double test_fraction = 0.2;
    bool graded = false;
};

void run_synth(SynthOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--seed", "seed", o.seed);
    cfg.patch("--test-fraction", "test_fraction", o.test_fraction);
    cfg.patch("--schema", "schema", o.schema_path);
    cfg.patch("--codes", "codes", o.codes_path);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const CodeMap codes = load_codes_opt(o.codes_path);
    FeatureEngineer engineer(schema, codes);
    SynthesisRates rates = o.graded ? graded_synthesis_rates() : SynthesisRates{};
    if (!o.rates_path.empty())
        rates = SynthesisRates::from_json(load_json_file(o.rates_path));
    else if (cfg.j.contains("rates"))
        rates = SynthesisRates::from_json(cfg.j.at("rates"));

    IngestReport ingest_report;
    const auto crashes = load_crash_records(o.input, schema.raw_columns(), ingest_report);
    SynthesisReport synth_report;
    const auto safes = synthesize_safe_samples(crashes, rates, o.seed, codes, &synth_report);
    const LabeledDataset data = build_dataset(crashes, safes, engineer, &ingest_report);
    log_info("built dataset of " + std::to_string(data.size()) + " rows");

    ReportWriter rw(o.out);
    if (o.test_fraction > 0.0) {
        const auto [train, test] = stratified_split(data, o.test_fraction, o.seed);
        rw.stage_csv("train.csv", train.csv_writer(schema));
        rw.stage_csv("test.csv", test.csv_writer(schema));
    } else {
        rw.stage_csv("dataset.csv", data.csv_writer(schema));
    }
    rw.stage_json("ingest_report.json", ingest_report.to_json());
    rw.stage_json("synthesis_report.json", synth_report.to_json());
    rw.commit("synth", o.seed,
              json{{"input", o.input},
                   {"rates", rates.to_json()},
                   {"test_fraction", o.test_fraction},
                   {"schema", schema.id()}});
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

struct TrainOpts {
    std::string train_path, out, config, schema_path;
    ForestParams params;
};

void patch_forest_params(const ConfigPatch& cfg, ForestParams& p) {
    cfg.patch("--trees", "trees", p.n_estimators);
    cfg.patch("--max-depth", "max_depth", p.max_depth);
    cfg.patch("--min-leaf", "min_samples_leaf", p.min_samples_leaf);
    cfg.patch("--features-per-split", "features_per_split", p.features_per_split);
    cfg.patch("--seed", "seed", p.seed);
}

void run_train(TrainOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    patch_forest_params(cfg, o.params);
    cfg.patch("--schema", "schema", o.schema_path);
    o.params.validate();

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const LabeledDataset data = LabeledDataset::load_csv(o.train_path, schema);
    const Forest model = train_forest(data, o.params);
    log_info("trained " + std::to_string(o.params.n_estimators) + " trees, oob accuracy " +
             fmt_double(model.meta().oob_accuracy));

    const auto counts = data.class_counts();
    ReportWriter rw(o.out);
    rw.stage_json("model.json", model.to_json());
    rw.stage_json("training_report.json",
                  json{{"params", o.params.to_json()},
                       {"n_rows", data.size()},
                       {"class_counts", json{{"safe", counts[0]}, {"crash", counts[1]}}},
                       {"oob_accuracy", model.meta().oob_accuracy}});
    rw.commit("train", o.params.seed,
              json{{"train", o.train_path}, {"schema", schema.id()}, {"params", o.params.to_json()}});
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

struct EvaluateOpts {
    std::string model_path, test_path, input_path, out, config, schema_path;
    double threshold = 0.5;
    int cv_k = 0;
    std::string cv_seeds = "42,84,126";
    ForestParams params;
};

void run_evaluate(EvaluateOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--threshold", "threshold", o.threshold);
    cfg.patch("--cv", "cv", o.cv_k);
    cfg.patch("--cv-seeds", "cv_seeds", o.cv_seeds);
    cfg.patch("--schema", "schema", o.schema_path);
    patch_forest_params(cfg, o.params);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    ReportWriter rw(o.out);
    json resolved{{"threshold", o.threshold}};

    if (o.cv_k > 0) {
        if (o.input_path.empty())
            throw ConfigError("--cv needs --input with the full labeled dataset");
        const LabeledDataset data = LabeledDataset::load_csv(o.input_path, schema);
        const auto seeds = parse_seed_list(o.cv_seeds);
        const CVReport cv = cross_validate(data, o.cv_k, seeds, o.params);
        log_info("cross-validation mean accuracy " + fmt_double(cv.accuracy.mean) + ", mean auc " +
                 fmt_double(cv.auc.mean));
        rw.stage_json("cv_report.json", cv.to_json());
        resolved["cv_k"] = o.cv_k;
        resolved["cv_seeds"] = seeds;
        resolved["input"] = o.input_path;
        resolved["params"] = o.params.to_json();
    }

    if (!o.test_path.empty()) {
        if (o.model_path.empty()) throw ConfigError("evaluate needs --model with --test");
        const Forest model = Forest::load(o.model_path);
        const LabeledDataset test = LabeledDataset::load_csv(o.test_path, schema);
        std::vector<double> scores(test.size());
        for (std::size_t i = 0; i < test.size(); ++i)
            scores[i] = model.predict_proba(test.contexts[i]).p_crash;

        const ConfusionMatrix cm = confusion_at_threshold(scores, test.labels, o.threshold);
        const double auc = roc_auc(scores, test.labels);
        const PrMetrics pr = pr_metrics(scores, test.labels);
        log_info("holdout accuracy " + fmt_double(cm.accuracy()) + ", auc " + fmt_double(auc));

        rw.stage_json("evaluation.json", json{{"confusion", cm.to_json()},
                                              {"roc_auc", auc},
                                              {"average_precision", pr.average_precision},
                                              {"threshold", o.threshold},
                                              {"n_test", test.size()}});
        CsvWriter curve({"threshold", "precision", "recall"});
        for (const auto& p : pr.curve)
            curve.append_row({fmt_double(p.threshold), fmt_double(p.precision), fmt_double(p.recall)});
        rw.stage_csv("pr_curve.csv", curve);

        CsvWriter sw({"id", "label", "p_crash"});
        for (std::size_t i = 0; i < test.size(); ++i)
            sw.append_row(
                {test.ids[i], std::to_string(label_value(test.labels[i])), fmt_double(scores[i])});
        rw.stage_csv("scores.csv", sw);
        resolved["model"] = o.model_path;
        resolved["test"] = o.test_path;
    }

    if (o.cv_k <= 0 && o.test_path.empty())
        throw ConfigError("evaluate needs --test (holdout) or --cv (cross-validation)");
    rw.commit("evaluate", o.params.seed, resolved);
}

// ---------------------------------------------------------------------------
// score
// ---------------------------------------------------------------------------

struct ScoreOpts {
    std::string model_path, input_path, context_path, record_path, out, config;
    std::string schema_path, codes_path, calibration_path, bands_path;
};

void run_score(ScoreOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--schema", "schema", o.schema_path);
    cfg.patch("--codes", "codes", o.codes_path);
    cfg.patch("--calibration", "calibration", o.calibration_path);
    cfg.patch("--bands", "bands", o.bands_path);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const CalibrationTable table = load_calibration_opt(o.calibration_path);
    const RiskBands bands = load_bands_opt(o.bands_path);
    const Forest model = Forest::load(o.model_path);
    ReportWriter rw(o.out);

    std::vector<std::string> ids;
    std::vector<DrivingContext> contexts;
    if (!o.context_path.empty()) {
        ids.push_back("context");
        contexts.push_back(DrivingContext::from_json(load_json_file(o.context_path)));
    } else if (!o.record_path.empty()) {
        const json j = load_json_file(o.record_path);
        if (!j.is_object()) throw DataError("record file must hold an object of raw fields");
        CrashRecord rec;
        rec.casenum = "record";
        for (const auto& [k, v] : j.items()) {
            if (!v.is_number()) throw DataError("record field " + k + " is not a number");
            rec.fields[k] = v.get<double>();
        }
        FeatureEngineer engineer(schema, load_codes_opt(o.codes_path));
        ids.push_back(rec.casenum);
        contexts.push_back(engineer.engineer(rec));
    } else if (!o.input_path.empty()) {
        load_context_batch(o.input_path, schema, ids, contexts);
    } else {
        throw ConfigError("score needs one of --context, --record, --input");
    }

    std::vector<double> calibrated;
    json rows = json::array();
    CsvWriter w({"id", "p_crash", "raw_score", "calibrated_score", "risk_level", "penalties"});
    for (std::size_t i = 0; i < contexts.size(); ++i) {
        const auto check = validate_context(contexts[i], schema);
        if (!check.ok())
            throw DataError("row " + ids[i] + ": " + check.violations.front().feature + " " +
                            check.violations.front().message);
        const ClassProbabilities prob = model.predict_proba(contexts[i]);
        const SafetyAssessment a = assess(model, contexts[i], schema, table, bands);
        calibrated.push_back(a.calibrated_score);
        json row = a.to_json();
        row["id"] = ids[i];
        row["p_crash"] = prob.p_crash;
        rows.push_back(std::move(row));
        w.append_row({ids[i], fmt_double(prob.p_crash), fmt_double(a.raw_score),
                      fmt_double(a.calibrated_score), std::string(risk_level_name(a.risk_level)),
                      penalties_cell(a)});
    }

    if (contexts.size() == 1) {
        rw.stage_json("assessment.json", rows.front());
    } else {
        rw.stage_csv("assessments.csv", w);
        std::map<std::string, std::size_t> band_counts;
        for (const auto& r : rows) ++band_counts[r.at("risk_level").get<std::string>()];
        rw.stage_json("score_report.json",
                      json{{"distribution", DistributionStats::from(calibrated).to_json()},
                           {"band_counts", band_counts}});
    }
    log_info("scored " + std::to_string(contexts.size()) + " contexts");
    rw.commit("score", 0, json{{"model", o.model_path}, {"n", contexts.size()}});
}

// ---------------------------------------------------------------------------
// explain
// ---------------------------------------------------------------------------

struct ExplainOpts {
    std::string model_path, background_path, context_path, input_path, out, config;
    std::string schema_path, codes_path, calibration_path, bands_path;
    std::size_t limit = 10;
    bool rank = false;
    std::string metric = "accuracy";
    int repeats = 5;
    std::uint64_t seed = 42;
};

json explanation_json(const std::string& id, const DrivingContext& ctx, const ShapExplanation& exp,
                      const FeatureSchema& schema, const SafetyAssessment& assessment,
                      const std::vector<Recommendation>& recs) {
    std::vector<std::size_t> order(exp.contributions.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(), [&](std::size_t a, std::size_t b) {
        return std::abs(exp.contributions[a]) > std::abs(exp.contributions[b]);
    });
    json contribs = json::array();
    for (const std::size_t f : order)
        contribs.push_back(json{{"feature", schema.at(f).name},
                                {"value", ctx.values[f]},
                                {"phi", exp.contributions[f]}});
    json jrecs = json::array();
    for (const auto& r : recs) jrecs.push_back(r.to_json());
    return json{{"id", id},
                {"base_value", exp.base_value},
                {"model_output", exp.model_output},
                {"reconstruction", exp.reconstruction()},
                {"contributions", contribs},
                {"assessment", assessment.to_json()},
                {"recommendations", jrecs}};
}

void run_explain(ExplainOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--limit", "limit", o.limit);
    cfg.patch("--metric", "metric", o.metric);
    cfg.patch("--repeats", "repeats", o.repeats);
    cfg.patch("--seed", "seed", o.seed);
    cfg.patch("--schema", "schema", o.schema_path);
    cfg.patch("--codes", "codes", o.codes_path);
    cfg.patch("--calibration", "calibration", o.calibration_path);
    cfg.patch("--bands", "bands", o.bands_path);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const CodeMap codes = load_codes_opt(o.codes_path);
    const CalibrationTable table = load_calibration_opt(o.calibration_path);
    const RiskBands bands = load_bands_opt(o.bands_path);
    const Forest model = Forest::load(o.model_path);
    FeatureEngineer engineer(schema, codes);
    ReportWriter rw(o.out);
    json resolved{{"model", o.model_path}};

    if (o.rank) {
        if (o.input_path.empty()) throw ConfigError("--rank needs --input with a labeled dataset");
        const LabeledDataset data = LabeledDataset::load_csv(o.input_path, schema);
        PermutationMetric metric = PermutationMetric::Accuracy;
        if (o.metric == "auc")
            metric = PermutationMetric::Auc;
        else if (o.metric != "accuracy")
            throw ConfigError("metric must be accuracy or auc");
        const ImportanceRanking imp = impurity_importance(model);
        const ImportanceRanking perm = permutation_importance(model, data, metric, o.repeats, o.seed);
        const ConsensusRanking consensus = consensus_rank({imp, perm});

        CsvWriter w({"feature", "group", "impurity", "impurity_rank", "permutation",
                     "permutation_rank", "mean_rank"});
        for (const auto& e : consensus.entries) {
            const auto f = static_cast<std::size_t>(e.feature);
            w.append_row({schema.at(f).name, std::string(group_name(schema.at(f).group)),
                          fmt_double(imp.scores[f]), std::to_string(e.per_method_rank[0]),
                          fmt_double(perm.scores[f]), std::to_string(e.per_method_rank[1]),
                          fmt_double(e.mean_rank)});
        }
        rw.stage_csv("importance.csv", w);
        json top = json::array();
        for (std::size_t k = 0; k < consensus.entries.size() && k < 15; ++k)
            top.push_back(schema.at(static_cast<std::size_t>(consensus.entries[k].feature)).name);
        rw.stage_json("importance.json", json{{"methods", consensus.methods},
                                              {"metric", o.metric},
                                              {"repeats", o.repeats},
                                              {"top_features", top}});
        resolved["rank"] = true;
        resolved["metric"] = o.metric;
        resolved["repeats"] = o.repeats;
    }

    if (!o.context_path.empty() || !o.input_path.empty()) {
        if (o.background_path.empty())
            throw ConfigError("explanations need --background with reference rows");
        std::vector<std::string> bg_ids;
        std::vector<DrivingContext> background;
        load_context_batch(o.background_path, schema, bg_ids, background);
        const TreeShapExplainer explainer(model, background);

        std::vector<std::string> ids;
        std::vector<DrivingContext> contexts;
        if (!o.context_path.empty()) {
            ids.push_back("context");
            contexts.push_back(DrivingContext::from_json(load_json_file(o.context_path)));
        } else {
            load_context_batch(o.input_path, schema, ids, contexts);
            if (contexts.size() > o.limit) {
                contexts.resize(o.limit);
                ids.resize(o.limit);
            }
        }
        json out = json::array();
        for (std::size_t i = 0; i < contexts.size(); ++i) {
            const ShapExplanation exp = explainer.explain(contexts[i]);
            const SafetyAssessment a = assess(model, contexts[i], schema, table, bands);
            const auto recs = recommend(model, engineer, table, bands, contexts[i], exp);
            out.push_back(explanation_json(ids[i], contexts[i], exp, schema, a, recs));
        }
        if (!o.context_path.empty())
            rw.stage_json("explanation.json", out.front());
        else
            rw.stage_json("explanations.json", out);
        log_info("explained " + std::to_string(contexts.size()) + " contexts");
        resolved["background"] = o.background_path;
    }
    rw.commit("explain", o.seed, resolved);
}

// ---------------------------------------------------------------------------
// grid
// ---------------------------------------------------------------------------

struct GridOpts {
    std::string model_path, out, config, schema_path, codes_path, calibration_path, bands_path;
    std::string grid_path, expected_path;
};

void run_grid(GridOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--schema", "schema", o.schema_path);
    cfg.patch("--codes", "codes", o.codes_path);
    cfg.patch("--calibration", "calibration", o.calibration_path);
    cfg.patch("--bands", "bands", o.bands_path);
    cfg.patch("--grid", "grid", o.grid_path);
    cfg.patch("--expected", "expected", o.expected_path);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const CodeMap codes = load_codes_opt(o.codes_path);
    const CalibrationTable table = load_calibration_opt(o.calibration_path);
    const RiskBands bands = load_bands_opt(o.bands_path);
    const Forest model = Forest::load(o.model_path);
    FeatureEngineer engineer(schema, codes);

    const ScenarioGridSpec spec = o.grid_path.empty()
                                      ? ScenarioGridSpec::defaults()
                                      : ScenarioGridSpec::from_json(load_json_file(o.grid_path));
    const ExpectedLevelRule rule = o.expected_path.empty()
                                       ? ExpectedLevelRule::defaults()
                                       : ExpectedLevelRule::from_json(load_json_file(o.expected_path));
    const ScenarioGrid grid = build_scenario_grid(spec, engineer);
    const GridScoreReport report = score_grid(grid, model, schema, table, bands, rule);
    log_info("scored " + std::to_string(grid.cells.size()) + " grid cells, ordinal accuracy " +
             fmt_double(report.ordinal.accuracy()));

    std::vector<std::string> header{"cell"};
    for (const auto& f : spec.factors) header.push_back(f.name);
    for (const char* c : {"raw_score", "calibrated_score", "risk_level", "expected_level", "distance"})
        header.push_back(c);
    CsvWriter w(header);
    for (std::size_t cell = 0; cell < grid.cells.size(); ++cell) {
        std::vector<std::string> row{std::to_string(cell)};
        const auto levels = spec.levels_of(cell);
        for (std::size_t f = 0; f < spec.factors.size(); ++f)
            row.push_back(spec.factors[f].levels[levels[f]]);
        const auto& a = report.assessments[cell];
        row.push_back(fmt_double(a.raw_score));
        row.push_back(fmt_double(a.calibrated_score));
        row.push_back(std::string(risk_level_name(a.risk_level)));
        row.push_back(std::string(risk_level_name(report.expected_levels[cell])));
        row.push_back(std::to_string(std::abs(rank(a.risk_level) - rank(report.expected_levels[cell]))));
        w.append_row(row);
    }

    json level_means = json::array();
    for (const auto& lm : report.level_means)
        level_means.push_back(json{{"factor", lm.factor},
                                   {"level", lm.level},
                                   {"n", lm.n},
                                   {"mean_calibrated", lm.mean_calibrated},
                                   {"mean_p_crash", lm.mean_p_crash}});
    ReportWriter rw(o.out);
    rw.stage_csv("grid.csv", w);
    rw.stage_json("grid_report.json", json{{"cells", grid.cells.size()},
                                           {"calibrated", report.calibrated_stats.to_json()},
                                           {"raw", report.raw_stats.to_json()},
                                           {"level_means", level_means},
                                           {"ordinal", report.ordinal.to_json()}});
    rw.commit("grid", 0, json{{"model", o.model_path}, {"cells", grid.cells.size()}});
}

// ---------------------------------------------------------------------------
// sensitivity
// ---------------------------------------------------------------------------

struct SensitivityOpts {
    std::string model_path, out, config, schema_path, codes_path, calibration_path, bands_path;
    std::string transitions_path;
};

void run_sensitivity(SensitivityOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--schema", "schema", o.schema_path);
    cfg.patch("--codes", "codes", o.codes_path);
    cfg.patch("--calibration", "calibration", o.calibration_path);
    cfg.patch("--bands", "bands", o.bands_path);
    cfg.patch("--transitions", "transitions", o.transitions_path);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const CodeMap codes = load_codes_opt(o.codes_path);
    const CalibrationTable table = load_calibration_opt(o.calibration_path);
    const RiskBands bands = load_bands_opt(o.bands_path);
    const Forest model = Forest::load(o.model_path);
    FeatureEngineer engineer(schema, codes);

    std::vector<Transition> transitions = default_transitions();
    if (!o.transitions_path.empty()) {
        transitions.clear();
        for (const auto& jt : load_json_file(o.transitions_path))
            transitions.push_back({jt.at("factor").get<std::string>(),
                                   jt.at("from").get<std::string>(), jt.at("to").get<std::string>()});
        if (transitions.empty()) throw ConfigError("transition list is empty");
    }

    // Effect sizes are scaled by the spread of the full default grid.
    const ScenarioGrid grid = build_scenario_grid(ScenarioGridSpec::defaults(), engineer);
    std::vector<double> calibrated;
    for (const auto& ctx : grid.cells)
        calibrated.push_back(assess(model, ctx, schema, table, bands).calibrated_score);
    const double sigma = DistributionStats::from(calibrated).stddev;

    const auto rows = sensitivity(model, engineer, table, bands, transitions, sigma);
    CsvWriter w({"factor", "from", "to", "from_score", "to_score", "delta", "effect_size"});
    json jrows = json::array();
    for (const auto& r : rows) {
        w.append_row({r.transition.factor, r.transition.from_level, r.transition.to_level,
                      fmt_double(r.from_score), fmt_double(r.to_score), fmt_double(r.delta),
                      fmt_double(r.effect_size)});
        jrows.push_back(json{{"factor", r.transition.factor},
                             {"from", r.transition.from_level},
                             {"to", r.transition.to_level},
                             {"from_score", r.from_score},
                             {"to_score", r.to_score},
                             {"delta", r.delta},
                             {"effect_size", r.effect_size}});
    }
    ReportWriter rw(o.out);
    rw.stage_csv("sensitivity.csv", w);
    rw.stage_json("sensitivity.json", json{{"reference_sigma", sigma}, {"transitions", jrows}});
    rw.commit("sensitivity", 0, json{{"model", o.model_path}, {"n_transitions", rows.size()}});
}

// ---------------------------------------------------------------------------
// ablate
// ---------------------------------------------------------------------------

struct AblateOpts {
    std::string input_path, out, config, schema_path;
    std::vector<std::string> drops;
    double test_fraction = 0.2;
    ForestParams params;
};

void run_ablate(AblateOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--test-fraction", "test_fraction", o.test_fraction);
    cfg.patch("--schema", "schema", o.schema_path);
    patch_forest_params(cfg, o.params);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const LabeledDataset data = LabeledDataset::load_csv(o.input_path, schema);

    std::vector<std::vector<FeatureGroup>> configs;
    if (o.drops.empty()) {
        for (const FeatureGroup g : kAllGroups)
            if (!schema.group_indices(g).empty()) configs.push_back({g});
    } else {
        for (const auto& spec : o.drops) {
            std::vector<FeatureGroup> groups;
            std::stringstream ss(spec);
            std::string item;
            while (std::getline(ss, item, ',')) groups.push_back(parse_group(item));
            if (groups.empty()) throw ConfigError("empty --drop entry");
            configs.push_back(std::move(groups));
        }
    }

    const AblationReport report =
        ablate(data, schema, configs, o.params, o.test_fraction, o.params.seed);
    log_info("ablation baseline auc " + fmt_double(report.baseline_auc));

    CsvWriter w({"config", "n_features", "auc", "delta_pct"});
    w.append_row(
        {"baseline", std::to_string(report.baseline_features), fmt_double(report.baseline_auc), "0"});
    json jrows = json::array();
    for (const auto& r : report.rows) {
        w.append_row({r.name, std::to_string(r.n_features), fmt_double(r.auc),
                      fmt_double(r.delta_pct)});
        jrows.push_back(json{{"config", r.name},
                             {"n_features", r.n_features},
                             {"auc", r.auc},
                             {"delta_pct", r.delta_pct}});
    }
    ReportWriter rw(o.out);
    rw.stage_csv("ablation.csv", w);
    rw.stage_json("ablation.json", json{{"baseline_auc", report.baseline_auc},
                                        {"baseline_features", report.baseline_features},
                                        {"rows", jrows},
                                        {"test_fraction", o.test_fraction}});
    rw.commit("ablate", o.params.seed, json{{"input", o.input_path}, {"params", o.params.to_json()}});
}

// ---------------------------------------------------------------------------
// cluster
// ---------------------------------------------------------------------------

struct ClusterOpts {
    std::string input_path, out, config, schema_path;
    int k = 4;
    std::uint64_t seed = 42;
};

void run_cluster(ClusterOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--k", "k", o.k);
    cfg.patch("--seed", "seed", o.seed);
    cfg.patch("--schema", "schema", o.schema_path);
    CompositeWeights weights;
    if (cfg.j.contains("weights")) weights = CompositeWeights::from_json(cfg.j.at("weights"));

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    std::vector<std::string> ids;
    std::vector<DrivingContext> contexts;
    load_context_batch(o.input_path, schema, ids, contexts);

    const ClusterReport report = cluster_drivers(contexts, ids, schema, o.k, o.seed, weights);
    log_info("clustered " + std::to_string(ids.size()) + " profiles into " + std::to_string(o.k));

    CsvWriter w({"id", "aggression", "risk_taking", "cluster", "archetype"});
    for (const auto& p : report.profiles)
        w.append_row({p.id, fmt_double(p.aggression), fmt_double(p.risk_taking),
                      std::to_string(p.cluster),
                      report.cluster_labels[static_cast<std::size_t>(p.cluster)]});

    std::vector<std::size_t> sizes(report.clustering.centers.size(), 0);
    for (const int c : report.clustering.assignment) ++sizes[static_cast<std::size_t>(c)];
    json centers = json::array();
    for (std::size_t c = 0; c < report.clustering.centers.size(); ++c)
        centers.push_back(json{{"cluster", c},
                               {"aggression", report.clustering.centers[c][0]},
                               {"risk_taking", report.clustering.centers[c][1]},
                               {"size", sizes[c]},
                               {"archetype", report.cluster_labels[c]}});
    ReportWriter rw(o.out);
    rw.stage_csv("profiles.csv", w);
    rw.stage_json("clusters.json", json{{"k", o.k},
                                        {"centers", centers},
                                        {"iterations", report.clustering.iterations},
                                        {"wcss_trace", report.clustering.wcss_trace},
                                        {"weights", weights.to_json()}});
    rw.commit("cluster", o.seed, json{{"input", o.input_path}, {"k", o.k}});
}

// ---------------------------------------------------------------------------
// multipliers
// ---------------------------------------------------------------------------

struct MultipliersOpts {
    std::string input_path, out, config, schema_path;
};

void run_multipliers(MultipliersOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--schema", "schema", o.schema_path);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const LabeledDataset data = LabeledDataset::load_csv(o.input_path, schema);
    const MultiplierReport report = risk_multipliers(data, schema, default_factor_combos());

    std::vector<DrivingContext> crash_contexts;
    for (std::size_t i = 0; i < data.size(); ++i)
        if (data.labels[i] == Label::Crash) crash_contexts.push_back(data.contexts[i]);
    const PrevalenceReport prevalence = factor_prevalence(crash_contexts, schema);

    CsvWriter w({"combo", "support", "crashes", "multiplier"});
    json jrows = json::array();
    for (const auto& r : report.rows) {
        w.append_row({r.name, std::to_string(r.support), std::to_string(r.crashes),
                      r.multiplier ? fmt_double(*r.multiplier) : ""});
        jrows.push_back(json{{"combo", r.name},
                             {"support", r.support},
                             {"crashes", r.crashes},
                             {"multiplier", r.multiplier ? json(*r.multiplier) : json(nullptr)}});
    }
    ReportWriter rw(o.out);
    rw.stage_csv("multipliers.csv", w);
    rw.stage_json("multipliers.json",
                  json{{"baseline_rate", report.baseline_rate},
                       {"rows", jrows},
                       {"multi_factor_share", report.multi_factor_share},
                       {"crash_prevalence", json{{"n", prevalence.n},
                                                 {"shares", prevalence.shares},
                                                 {"multi_factor_share",
                                                  prevalence.multi_factor_share}}}});
    rw.commit("multipliers", 0, json{{"input", o.input_path}});
}

// ---------------------------------------------------------------------------
// impact
// ---------------------------------------------------------------------------

struct ImpactOpts {
    std::string model_path, input_path, out, config;
    std::string schema_path, calibration_path, bands_path;
    std::string thresholds = "20,40,60";
    double compliance = 0.5;
};

void run_impact(ImpactOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--thresholds", "thresholds", o.thresholds);
    cfg.patch("--compliance", "compliance", o.compliance);
    cfg.patch("--schema", "schema", o.schema_path);
    cfg.patch("--calibration", "calibration", o.calibration_path);
    cfg.patch("--bands", "bands", o.bands_path);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const CalibrationTable table = load_calibration_opt(o.calibration_path);
    const RiskBands bands = load_bands_opt(o.bands_path);
    const Forest model = Forest::load(o.model_path);

    std::vector<std::string> ids;
    std::vector<DrivingContext> contexts;
    load_context_batch(o.input_path, schema, ids, contexts);
    std::vector<SafetyAssessment> assessments;
    std::vector<double> probs;
    for (const auto& ctx : contexts) {
        assessments.push_back(assess(model, ctx, schema, table, bands));
        probs.push_back(model.predict_proba(ctx).p_crash);
    }

    const auto thresholds = parse_double_list(o.thresholds);
    const ImpactReport report = simulate_impact(assessments, probs, thresholds, o.compliance);
    json jrows = json::array();
    for (const auto& r : report.rows)
        jrows.push_back(json{{"threshold", r.threshold},
                             {"flagged", r.flagged},
                             {"flagged_share", r.flagged_share},
                             {"expected_reduction_share", r.expected_reduction_share}});
    ReportWriter rw(o.out);
    rw.stage_json("impact.json",
                  json{{"compliance", report.compliance}, {"n", contexts.size()}, {"rows", jrows}});
    rw.commit("impact", 0,
              json{{"model", o.model_path}, {"input", o.input_path}, {"compliance", o.compliance}});
}

// ---------------------------------------------------------------------------
// validate
// ---------------------------------------------------------------------------

struct ValidateOpts {
    std::string model_path, trajectories_path, out, config;
    std::string schema_path, codes_path, calibration_path, bands_path, thresholds_path;
};

void run_validate(ValidateOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--schema", "schema", o.schema_path);
    cfg.patch("--codes", "codes", o.codes_path);
    cfg.patch("--calibration", "calibration", o.calibration_path);
    cfg.patch("--bands", "bands", o.bands_path);
    cfg.patch("--kinematics", "kinematics", o.thresholds_path);

    const FeatureSchema schema = load_schema_opt(o.schema_path);
    const CodeMap codes = load_codes_opt(o.codes_path);
    const CalibrationTable table = load_calibration_opt(o.calibration_path);
    const RiskBands bands = load_bands_opt(o.bands_path);
    const Forest model = Forest::load(o.model_path);
    FeatureEngineer engineer(schema, codes);
    const KinematicThresholds thresholds =
        o.thresholds_path.empty() ? KinematicThresholds{}
                                  : KinematicThresholds::from_json(load_json_file(o.thresholds_path));

    const auto scenarios = load_trajectories(o.trajectories_path);
    const TrajectoryValidationReport report =
        validate_trajectories(scenarios, model, engineer, table, bands, thresholds);
    log_info("validated " + std::to_string(scenarios.size()) + " scenarios, ordered=" +
             (report.ordered ? std::string("yes") : std::string("no")));

    CsvWriter w({"scenario_id", "type", "min_distance", "min_ttc", "max_speed", "mean_speed",
                 "hard_brake", "speeding", "p_crash", "calibrated_score", "risk_level"});
    for (const auto& s : report.scenarios)
        w.append_row({s.scenario_id, std::string(scenario_type_name(s.type)),
                      fmt_double(s.kinematics.min_distance),
                      std::isfinite(s.kinematics.min_ttc) ? fmt_double(s.kinematics.min_ttc) : "",
                      fmt_double(s.kinematics.max_speed), fmt_double(s.kinematics.mean_speed),
                      s.kinematics.aggressive.hard_brake ? "1" : "0",
                      s.kinematics.aggressive.speeding ? "1" : "0", fmt_double(s.p_crash),
                      fmt_double(s.assessment.calibrated_score),
                      std::string(risk_level_name(s.assessment.risk_level))});

    json per_type = json::array();
    for (const auto& st : report.per_type)
        per_type.push_back(json{{"type", std::string(scenario_type_name(st.type))},
                                {"n", st.n},
                                {"mean_p_crash", st.mean_p_crash},
                                {"mean_calibrated", st.mean_calibrated}});
    ReportWriter rw(o.out);
    rw.stage_csv("scenarios.csv", w);
    rw.stage_json("validation.json", json{{"per_type", per_type},
                                          {"ordered", report.ordered},
                                          {"thresholds", thresholds.to_json()}});
    rw.commit("validate", 0, json{{"model", o.model_path}, {"trajectories", o.trajectories_path}});
}

// ---------------------------------------------------------------------------
// fixture
// ---------------------------------------------------------------------------

struct FixtureOpts {
    std::string out, config, kind = "all";
    std::size_t rows = 8000;
    std::size_t eval_rows = 8000;
    std::uint64_t seed = 7;
    std::uint64_t traj_seed = 3;
    std::size_t planted_rows = 20000;
    std::uint64_t planted_seed = 1;
    double noise = 0.05;
};

void run_fixture(FixtureOpts& o, const CLI::App* sub) {
    const ConfigPatch cfg = ConfigPatch::load(sub, o.config);
    cfg.patch("--kind", "kind", o.kind);
    cfg.patch("--rows", "rows", o.rows);
    cfg.patch("--eval-rows", "eval_rows", o.eval_rows);
    cfg.patch("--seed", "seed", o.seed);
    cfg.patch("--traj-seed", "traj_seed", o.traj_seed);
    cfg.patch("--planted-rows", "planted_rows", o.planted_rows);
    cfg.patch("--planted-seed", "planted_seed", o.planted_seed);
    cfg.patch("--noise", "noise", o.noise);

    if (o.kind != "all" && o.kind != "crashes" && o.kind != "trajectories" && o.kind != "planted")
        throw ConfigError("fixture kind must be all, crashes, trajectories, or planted");
    const FeatureSchema schema = default_schema();
    ReportWriter rw(o.out);
    json written = json::object();

    if (o.kind == "all" || o.kind == "crashes") {
        const CrashFixtureSpec train_spec{o.rows, CrashFixtureSpec::Mode::Training, o.seed};
        const CrashFixtureSpec eval_spec{o.eval_rows, CrashFixtureSpec::Mode::Prevalence,
                                         mix_seed(o.seed, 0xE7A1u)};
        const auto cols = schema.raw_columns();
        rw.stage_csv("crashes_train.csv", make_crash_csv(make_crash_records(train_spec), cols));
        rw.stage_csv("crashes_eval.csv", make_crash_csv(make_crash_records(eval_spec), cols));
        written["crashes_train.csv"] = o.rows;
        written["crashes_eval.csv"] = o.eval_rows;
    }
    if (o.kind == "all" || o.kind == "trajectories") {
        TrajectoryFixtureSpec spec;
        spec.seed = o.traj_seed;
        const auto scenarios = make_trajectories(spec);
        rw.stage_csv("trajectories.csv", make_trajectory_csv(scenarios));
        written["trajectories.csv"] = scenarios.size();
    }
    if (o.kind == "all" || o.kind == "planted") {
        for (const auto layout : {PlantedSpec::Layout::Joint, PlantedSpec::Layout::Split}) {
            PlantedSpec spec;
            spec.rows = o.planted_rows;
            spec.noise = o.noise;
            spec.layout = layout;
            spec.seed = o.planted_seed;
            const FeatureSchema ps = planted_schema(layout);
            const LabeledDataset d = make_planted(spec);
            const std::string stem =
                layout == PlantedSpec::Layout::Joint ? "planted_joint" : "planted_split";
            rw.stage_csv(stem + ".csv", d.csv_writer(ps));
            rw.stage_json(stem + "_schema.json", ps.to_json());
            written[stem + ".csv"] = d.size();
        }
    }
    rw.stage_json("fixture_report.json", written);
    rw.commit("fixture", o.seed, json{{"kind", o.kind}, {"rows", o.rows}});
    log_info("fixture data written to " + o.out);
}

void add_forest_params(CLI::App* sub, ForestParams& p) {
    sub->add_option("--trees", p.n_estimators, "number of trees");
    sub->add_option("--max-depth", p.max_depth, "tree depth cap, -1 for unlimited");
    sub->add_option("--min-leaf", p.min_samples_leaf, "minimum rows per leaf");
    sub->add_option("--features-per-split,--mtry", p.features_per_split,
                    "candidate features per node, 0 for sqrt");
    sub->add_option("--seed", p.seed, "training seed");
}

}  // namespace

int main(int argc, char** argv) {
    CLI::App app{"crash-informed driving safety scoring toolkit"};
    app.require_subcommand(1);
    app.set_version_flag("--version", std::string(kVersion));

    auto ingest = std::make_shared<IngestOpts>();
    {
        CLI::App* sub = app.add_subcommand("ingest", "clean a raw crash CSV and emit features");
        sub->add_option("--input", ingest->input, "raw crash CSV")->required();
        sub->add_option("--out", ingest->out, "report directory")->required();
        sub->add_option("--config", ingest->config, "JSON config file");
        sub->add_option("--schema", ingest->schema_path, "feature schema JSON");
        sub->add_option("--codes", ingest->codes_path, "code map JSON");
        sub->callback([ingest, sub] { run_ingest(*ingest, sub); });
    }

    auto synth = std::make_shared<SynthOpts>();
    {
        CLI::App* sub =
            app.add_subcommand("synth", "build a labeled dataset with synthetic safe twins");
        sub->add_option("--input", synth->input, "raw crash CSV")->required();
        sub->add_option("--out", synth->out, "report directory")->required();
        sub->add_option("--config", synth->config, "JSON config file");
        sub->add_option("--schema", synth->schema_path, "feature schema JSON");
        sub->add_option("--codes", synth->codes_path, "code map JSON");
        sub->add_option("--rates", synth->rates_path, "synthesis rates JSON");
        sub->add_flag("--graded", synth->graded, "use graded speed reset rates");
        sub->add_option("--seed", synth->seed, "synthesis seed");
        sub->add_option("--test-fraction", synth->test_fraction,
                        "held-out share, 0 for a single file");
        sub->callback([synth, sub] { run_synth(*synth, sub); });
    }

    auto train = std::make_shared<TrainOpts>();
    {
        CLI::App* sub = app.add_subcommand("train", "train the bagged tree ensemble");
        sub->add_option("--train", train->train_path, "labeled training CSV")->required();
        sub->add_option("--out", train->out, "report directory")->required();
        sub->add_option("--config", train->config, "JSON config file");
        sub->add_option("--schema", train->schema_path, "feature schema JSON");
        train->params.seed = 42;
        add_forest_params(sub, train->params);
        sub->callback([train, sub] { run_train(*train, sub); });
    }

    auto evaluate = std::make_shared<EvaluateOpts>();
    {
        CLI::App* sub = app.add_subcommand("evaluate", "holdout metrics and cross-validation");
        sub->add_option("--model", evaluate->model_path, "trained model JSON");
        sub->add_option("--test", evaluate->test_path, "labeled holdout CSV");
        sub->add_option("--input", evaluate->input_path, "full labeled CSV for --cv");
        sub->add_option("--out", evaluate->out, "report directory")->required();
        sub->add_option("--config", evaluate->config, "JSON config file");
        sub->add_option("--schema", evaluate->schema_path, "feature schema JSON");
        sub->add_option("--threshold", evaluate->threshold, "crash probability cutoff");
        sub->add_option("--cv", evaluate->cv_k, "fold count, 0 to skip");
        sub->add_option("--cv-seeds", evaluate->cv_seeds, "comma-separated iteration seeds");
        evaluate->params.seed = 42;
        add_forest_params(sub, evaluate->params);
        sub->callback([evaluate, sub] { run_evaluate(*evaluate, sub); });
    }

    auto score = std::make_shared<ScoreOpts>();
    {
        CLI::App* sub = app.add_subcommand("score", "assess contexts with a trained model");
        sub->add_option("--model", score->model_path, "trained model JSON")->required();
        sub->add_option("--input", score->input_path, "feature or labeled CSV");
        sub->add_option("--context", score->context_path, "single context JSON");
        sub->add_option("--record", score->record_path, "single raw record JSON");
        sub->add_option("--out", score->out, "report directory")->required();
        sub->add_option("--config", score->config, "JSON config file");
        sub->add_option("--schema", score->schema_path, "feature schema JSON");
        sub->add_option("--codes", score->codes_path, "code map JSON");
        sub->add_option("--calibration", score->calibration_path, "calibration table JSON");
        sub->add_option("--bands", score->bands_path, "risk band JSON");
        sub->callback([score, sub] { run_score(*score, sub); });
    }

    auto explain = std::make_shared<ExplainOpts>();
    {
        CLI::App* sub = app.add_subcommand("explain", "attributions, rankings, recommendations");
        sub->add_option("--model", explain->model_path, "trained model JSON")->required();
        sub->add_option("--background", explain->background_path, "reference rows CSV");
        sub->add_option("--context", explain->context_path, "single context JSON");
        sub->add_option("--input", explain->input_path, "feature or labeled CSV");
        sub->add_option("--limit", explain->limit, "max rows to explain from --input");
        sub->add_flag("--rank", explain->rank, "compute global importance rankings");
        sub->add_option("--metric", explain->metric, "permutation metric: accuracy or auc");
        sub->add_option("--repeats", explain->repeats, "permutation repeats");
        sub->add_option("--seed", explain->seed, "permutation seed");
        sub->add_option("--out", explain->out, "report directory")->required();
        sub->add_option("--config", explain->config, "JSON config file");
        sub->add_option("--schema", explain->schema_path, "feature schema JSON");
        sub->add_option("--codes", explain->codes_path, "code map JSON");
        sub->add_option("--calibration", explain->calibration_path, "calibration table JSON");
        sub->add_option("--bands", explain->bands_path, "risk band JSON");
        sub->callback([explain, sub] { run_explain(*explain, sub); });
    }

    auto grid = std::make_shared<GridOpts>();
    {
        CLI::App* sub = app.add_subcommand("grid", "score the full factor grid");
        sub->add_option("--model", grid->model_path, "trained model JSON")->required();
        sub->add_option("--out", grid->out, "report directory")->required();
        sub->add_option("--config", grid->config, "JSON config file");
        sub->add_option("--schema", grid->schema_path, "feature schema JSON");
        sub->add_option("--codes", grid->codes_path, "code map JSON");
        sub->add_option("--calibration", grid->calibration_path, "calibration table JSON");
        sub->add_option("--bands", grid->bands_path, "risk band JSON");
        sub->add_option("--grid", grid->grid_path, "grid spec JSON");
        sub->add_option("--expected", grid->expected_path, "expected-level rule JSON");
        sub->callback([grid, sub] { run_grid(*grid, sub); });
    }

    auto sens = std::make_shared<SensitivityOpts>();
    {
        CLI::App* sub = app.add_subcommand("sensitivity", "single-factor transition deltas");
        sub->add_option("--model", sens->model_path, "trained model JSON")->required();
        sub->add_option("--out", sens->out, "report directory")->required();
        sub->add_option("--config", sens->config, "JSON config file");
        sub->add_option("--schema", sens->schema_path, "feature schema JSON");
        sub->add_option("--codes", sens->codes_path, "code map JSON");
        sub->add_option("--calibration", sens->calibration_path, "calibration table JSON");
        sub->add_option("--bands", sens->bands_path, "risk band JSON");
        sub->add_option("--transitions", sens->transitions_path, "transition list JSON");
        sub->callback([sens, sub] { run_sensitivity(*sens, sub); });
    }

    auto ablate_opts = std::make_shared<AblateOpts>();
    {
        CLI::App* sub = app.add_subcommand("ablate", "retrain without feature groups");
        sub->add_option("--input", ablate_opts->input_path, "full labeled CSV")->required();
        sub->add_option("--out", ablate_opts->out, "report directory")->required();
        sub->add_option("--config", ablate_opts->config, "JSON config file");
        sub->add_option("--schema", ablate_opts->schema_path, "feature schema JSON");
        sub->add_option("--drop", ablate_opts->drops, "group set to remove, comma-joined; repeatable");
        sub->add_option("--test-fraction", ablate_opts->test_fraction, "held-out share");
        ablate_opts->params.seed = 42;
        add_forest_params(sub, ablate_opts->params);
        sub->callback([ablate_opts, sub] { run_ablate(*ablate_opts, sub); });
    }

    auto cluster = std::make_shared<ClusterOpts>();
    {
        CLI::App* sub = app.add_subcommand("cluster", "group drivers by behavior composites");
        sub->add_option("--input", cluster->input_path, "feature or labeled CSV")->required();
        sub->add_option("--out", cluster->out, "report directory")->required();
        sub->add_option("--config", cluster->config, "JSON config file");
        sub->add_option("--schema", cluster->schema_path, "feature schema JSON");
        sub->add_option("--k", cluster->k, "cluster count");
        sub->add_option("--seed", cluster->seed, "clustering seed");
        sub->callback([cluster, sub] { run_cluster(*cluster, sub); });
    }

    auto mult = std::make_shared<MultipliersOpts>();
    {
        CLI::App* sub = app.add_subcommand("multipliers", "crash-rate ratios per factor combo");
        sub->add_option("--input", mult->input_path, "labeled exposure CSV")->required();
        sub->add_option("--out", mult->out, "report directory")->required();
        sub->add_option("--config", mult->config, "JSON config file");
        sub->add_option("--schema", mult->schema_path, "feature schema JSON");
        sub->callback([mult, sub] { run_multipliers(*mult, sub); });
    }

    auto impact = std::make_shared<ImpactOpts>();
    {
        CLI::App* sub = app.add_subcommand("impact", "intervention reach at score thresholds");
        sub->add_option("--model", impact->model_path, "trained model JSON")->required();
        sub->add_option("--input", impact->input_path, "feature or labeled CSV")->required();
        sub->add_option("--out", impact->out, "report directory")->required();
        sub->add_option("--config", impact->config, "JSON config file");
        sub->add_option("--schema", impact->schema_path, "feature schema JSON");
        sub->add_option("--calibration", impact->calibration_path, "calibration table JSON");
        sub->add_option("--bands", impact->bands_path, "risk band JSON");
        sub->add_option("--thresholds", impact->thresholds, "comma-separated score cutoffs");
        sub->add_option("--compliance", impact->compliance, "share of flagged drivers who comply");
        sub->callback([impact, sub] { run_impact(*impact, sub); });
    }

    auto validate = std::make_shared<ValidateOpts>();
    {
        CLI::App* sub = app.add_subcommand("validate", "score trajectory scenarios by type");
        sub->add_option("--model", validate->model_path, "trained model JSON")->required();
        sub->add_option("--trajectories", validate->trajectories_path, "trajectory CSV")->required();
        sub->add_option("--out", validate->out, "report directory")->required();
        sub->add_option("--config", validate->config, "JSON config file");
        sub->add_option("--schema", validate->schema_path, "feature schema JSON");
        sub->add_option("--codes", validate->codes_path, "code map JSON");
        sub->add_option("--calibration", validate->calibration_path, "calibration table JSON");
        sub->add_option("--bands", validate->bands_path, "risk band JSON");
        sub->add_option("--kinematics", validate->thresholds_path, "kinematic thresholds JSON");
        sub->callback([validate, sub] { run_validate(*validate, sub); });
    }

    auto fixture = std::make_shared<FixtureOpts>();
    {
        CLI::App* sub = app.add_subcommand("fixture", "generate synthetic input data");
        sub->add_option("--out", fixture->out, "output directory")->required();
        sub->add_option("--config", fixture->config, "JSON config file");
        sub->add_option("--kind", fixture->kind, "all, crashes, trajectories, or planted");
        sub->add_option("--rows", fixture->rows, "training crash rows");
        sub->add_option("--eval-rows", fixture->eval_rows, "prevalence crash rows");
        sub->add_option("--seed", fixture->seed, "crash fixture seed");
        sub->add_option("--traj-seed", fixture->traj_seed, "trajectory fixture seed");
        sub->add_option("--planted-rows", fixture->planted_rows, "planted rows per layout");
        sub->add_option("--planted-seed", fixture->planted_seed, "planted seed");
        sub->add_option("--noise", fixture->noise, "planted label noise");
        sub->callback([fixture, sub] { run_fixture(*fixture, sub); });
    }

    try {
        app.parse(argc, argv);
    } catch (const CLI::CallForHelp& e) {
        return app.exit(e);
    } catch (const CLI::CallForVersion& e) {
        return app.exit(e);
    } catch (const CLI::ParseError& e) {
        app.exit(e);
        return 2;
    } catch (const ConfigError& e) {
        std::fprintf(stderr, "config error: %s\n", e.what());
        return 2;
    } catch (const DataError& e) {
        std::fprintf(stderr, "data error: %s\n", e.what());
        return 3;
    } catch (const std::exception& e) {
        std::fprintf(stderr, "internal error: %s\n", e.what());
        return 4;
    }
    return 0;
}
