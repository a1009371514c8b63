#include "himoe/experiments.hpp"

#include <algorithm>
#include <atomic>
#include <cmath>
#include <map>
#include <sstream>
#include <thread>

#include "himoe/alignment.hpp"
#include "himoe/errors.hpp"
#include "himoe/format.hpp"

namespace himoe {

ModelConfig model_config_for(const RunConfig& cfg, const DatasetManifest& manifest) {
    ModelConfig model_cfg = ModelConfig::from_manifest(manifest);
    model_cfg.feature_dim = cfg.feature_dim;
    model_cfg.encoder_hidden = cfg.encoder_hidden;
    model_cfg.modality_experts = cfg.modality_experts;
    model_cfg.emotion_experts = cfg.emotion_experts;
    model_cfg.use_emotion_bank = cfg.use_emotion_bank;
    model_cfg.uniform_routing = cfg.uniform_routing;
    model_cfg.head_modes = cfg.head_modes_for(model_cfg.dim_names);
    return model_cfg;
}

CellResult run_cell(const RunConfig& cfg, const DatasetBundle& data, const CellSpec& spec,
                    std::unique_ptr<Model>* model_out) {
    ModelConfig model_cfg = model_config_for(cfg, data.manifest);
    if (spec.emotion_experts > 0) model_cfg.emotion_experts = spec.emotion_experts;
    if (!spec.use_emotion_bank) model_cfg.use_emotion_bank = false;
    if (spec.uniform_routing) model_cfg.uniform_routing = true;

    auto model = make_model(spec.model_kind, model_cfg, derive_seed(spec.seed, "model_init"));

    TrainSettings settings = TrainSettings::from(cfg);
    settings.seed = spec.seed;
    settings.missing_rate = spec.missing_rate;
    if (spec.disable_alignment) settings.lambda = 0.0;

    CellResult result;
    result.spec = spec;
    result.train = train_model(*model, data, settings);
    result.val = evaluate_split(*model, data.val, "val", settings).report;
    result.test = evaluate_split(*model, data.test, "test", settings).report;
    if (model_out) *model_out = std::move(model);
    return result;
}

std::vector<CellResult> run_cells(const RunConfig& cfg, const DatasetBundle& data,
                                  const std::vector<CellSpec>& specs, int threads) {
    std::vector<CellResult> results(specs.size());
    if (specs.empty()) return results;
    int workers = threads > 0 ? threads : static_cast<int>(std::thread::hardware_concurrency());
    workers = std::max(1, std::min<int>(workers, static_cast<int>(specs.size())));

    if (workers == 1) {
        for (std::size_t i = 0; i < specs.size(); ++i) results[i] = run_cell(cfg, data, specs[i]);
        return results;
    }
    // Cells are independent: separate models, separate RNG streams, shared
    // read-only dataset. Results land at fixed indices, so ordering (and with
    // it output bytes) does not depend on scheduling.
    std::atomic<std::size_t> next{0};
    std::vector<std::thread> pool;
    std::vector<std::exception_ptr> errors(static_cast<std::size_t>(workers));
    for (int w = 0; w < workers; ++w) {
        pool.emplace_back([&, w] {
            try {
                while (true) {
                    const std::size_t i = next.fetch_add(1);
                    if (i >= specs.size()) break;
                    results[i] = run_cell(cfg, data, specs[i]);
                }
            } catch (...) {
                errors[static_cast<std::size_t>(w)] = std::current_exception();
            }
        });
    }
    for (auto& t : pool) t.join();
    for (const auto& e : errors) {
        if (e) std::rethrow_exception(e);
    }
    return results;
}

// ---- sweep: missing rate -----------------------------------------------------------

namespace {

struct Stats {
    double mean = 0.0;
    double stddev = 0.0;
};

Stats mean_std(const std::vector<double>& xs) {
    Stats s;
    if (xs.empty()) return s;
    for (const double x : xs) s.mean += x;
    s.mean /= static_cast<double>(xs.size());
    double acc = 0.0;
    for (const double x : xs) acc += (x - s.mean) * (x - s.mean);
    s.stddev = std::sqrt(acc / static_cast<double>(xs.size()));
    return s;
}

std::uint64_t sweep_seed(const RunConfig& cfg, int index) {
    return derive_seed(cfg.seed, "sweep_seed", static_cast<std::uint64_t>(index));
}

}  // namespace

SweepMissingResult sweep_missing(const RunConfig& cfg, const DatasetBundle& data) {
    std::vector<CellSpec> specs;
    for (const std::string& kind : {std::string("full"), std::string("baseline")}) {
        for (const double r : cfg.missing_rates) {
            for (int s = 0; s < cfg.sweep_seeds; ++s) {
                CellSpec spec;
                spec.model_kind = kind;
                spec.missing_rate = r;
                spec.seed = sweep_seed(cfg, s);
                specs.push_back(spec);
            }
        }
    }
    SweepMissingResult result;
    result.cells = run_cells(cfg, data, specs, cfg.threads);

    std::ostringstream os;
    os << "model,missing_rate,seed,ccc,pcc,mae\n";
    for (const CellResult& c : result.cells) {
        os << c.spec.model_kind << ',' << format_g9(c.spec.missing_rate) << ',' << c.spec.seed << ','
           << format_g9(c.test.mean_ccc()) << ',' << format_g9(c.test.mean_pcc()) << ','
           << format_g9(c.test.mean_mae()) << '\n';
    }
    for (const std::string& kind : {std::string("full"), std::string("baseline")}) {
        for (const double r : cfg.missing_rates) {
            std::vector<double> ccc_s, pcc_s, mae_s;
            for (const CellResult& c : result.cells) {
                if (c.spec.model_kind != kind || c.spec.missing_rate != r) continue;
                ccc_s.push_back(c.test.mean_ccc());
                pcc_s.push_back(c.test.mean_pcc());
                mae_s.push_back(c.test.mean_mae());
            }
            const Stats sc = mean_std(ccc_s), sp = mean_std(pcc_s), sm = mean_std(mae_s);
            os << kind << ',' << format_g9(r) << ",mean," << format_g9(sc.mean) << ',' << format_g9(sp.mean)
               << ',' << format_g9(sm.mean) << '\n';
            os << kind << ',' << format_g9(r) << ",std," << format_g9(sc.stddev) << ','
               << format_g9(sp.stddev) << ',' << format_g9(sm.stddev) << '\n';
        }
    }
    result.csv = os.str();
    return result;
}

double SweepMissingResult::mean_ccc(const std::string& model, double rate) const {
    std::vector<double> xs;
    for (const CellResult& c : cells) {
        if (c.spec.model_kind == model && c.spec.missing_rate == rate) xs.push_back(c.test.mean_ccc());
    }
    return mean_std(xs).mean;
}

double SweepMissingResult::std_ccc(const std::string& model, double rate) const {
    std::vector<double> xs;
    for (const CellResult& c : cells) {
        if (c.spec.model_kind == model && c.spec.missing_rate == rate) xs.push_back(c.test.mean_ccc());
    }
    return mean_std(xs).stddev;
}

// ---- sweep: emotion expert count --------------------------------------------------

SweepExpertsResult sweep_experts(const RunConfig& cfg, const DatasetBundle& data) {
    std::vector<CellSpec> specs;
    for (const int experts : cfg.expert_counts) {
        for (int s = 0; s < cfg.sweep_seeds; ++s) {
            CellSpec spec;
            spec.model_kind = "full";
            spec.missing_rate = cfg.missing_rate;
            spec.emotion_experts = experts;
            spec.seed = sweep_seed(cfg, s);
            specs.push_back(spec);
        }
    }
    SweepExpertsResult result;
    result.cells = run_cells(cfg, data, specs, cfg.threads);

    std::ostringstream os;
    os << "emotion_experts,seed,val_ccc\n";
    for (const CellResult& c : result.cells) {
        os << c.spec.emotion_experts << ',' << c.spec.seed << ',' << format_g9(c.val.mean_ccc()) << '\n';
    }
    for (const int experts : cfg.expert_counts) {
        std::vector<double> xs;
        for (const CellResult& c : result.cells) {
            if (c.spec.emotion_experts == experts) xs.push_back(c.val.mean_ccc());
        }
        const Stats s = mean_std(xs);
        os << experts << ",mean," << format_g9(s.mean) << '\n';
        os << experts << ",std," << format_g9(s.stddev) << '\n';
    }
    result.csv = os.str();
    return result;
}

double SweepExpertsResult::mean_ccc(int experts) const {
    std::vector<double> xs;
    for (const CellResult& c : cells) {
        if (c.spec.emotion_experts == experts) xs.push_back(c.val.mean_ccc());
    }
    return mean_std(xs).mean;
}

double SweepExpertsResult::std_ccc(int experts) const {
    std::vector<double> xs;
    for (const CellResult& c : cells) {
        if (c.spec.emotion_experts == experts) xs.push_back(c.val.mean_ccc());
    }
    return mean_std(xs).stddev;
}

double SweepExpertsResult::pooled_std() const {
    std::map<int, std::vector<double>> by_count;
    for (const CellResult& c : cells) by_count[c.spec.emotion_experts].push_back(c.val.mean_ccc());
    double acc = 0.0;
    int groups = 0;
    for (const auto& [experts, xs] : by_count) {
        const Stats s = mean_std(xs);
        acc += s.stddev * s.stddev;
        ++groups;
    }
    return groups > 0 ? std::sqrt(acc / groups) : 0.0;
}

// ---- ablations -----------------------------------------------------------------------

AblationResult run_ablations(const RunConfig& cfg, const DatasetBundle& data) {
    AblationResult result;
    result.variants = {"full", "no_emotion_bank", "no_alignment", "uniform_routing"};
    std::vector<CellSpec> specs;
    for (const std::string& variant : result.variants) {
        for (int s = 0; s < cfg.sweep_seeds; ++s) {
            CellSpec spec;
            spec.model_kind = "full";
            spec.missing_rate = cfg.missing_rate;
            spec.seed = sweep_seed(cfg, s);
            if (variant == "no_emotion_bank") spec.use_emotion_bank = false;
            if (variant == "no_alignment") spec.disable_alignment = true;
            if (variant == "uniform_routing") spec.uniform_routing = true;
            specs.push_back(spec);
        }
    }
    result.cells = run_cells(cfg, data, specs, cfg.threads);

    std::ostringstream os;
    os << "variant,seed,val_ccc,val_pcc,val_mae\n";
    for (std::size_t i = 0; i < result.cells.size(); ++i) {
        const CellResult& c = result.cells[i];
        const std::string& variant = result.variants[i / static_cast<std::size_t>(cfg.sweep_seeds)];
        os << variant << ',' << c.spec.seed << ',' << format_g9(c.val.mean_ccc()) << ','
           << format_g9(c.val.mean_pcc()) << ',' << format_g9(c.val.mean_mae()) << '\n';
    }
    for (const std::string& variant : result.variants) {
        std::vector<double> xs;
        for (std::size_t i = 0; i < result.cells.size(); ++i) {
            if (result.variants[i / static_cast<std::size_t>(cfg.sweep_seeds)] == variant) {
                xs.push_back(result.cells[i].val.mean_ccc());
            }
        }
        const Stats s = mean_std(xs);
        os << variant << ",mean," << format_g9(s.mean) << ",,\n";
        os << variant << ",std," << format_g9(s.stddev) << ",,\n";
    }
    result.csv = os.str();
    return result;
}

double AblationResult::mean_ccc(const std::string& variant) const {
    const auto it = std::find(variants.begin(), variants.end(), variant);
    if (it == variants.end()) throw ContractError("unknown ablation variant " + variant);
    const std::size_t index = static_cast<std::size_t>(it - variants.begin());
    const std::size_t seeds = cells.size() / variants.size();
    double acc = 0.0;
    for (std::size_t s = 0; s < seeds; ++s) acc += cells[index * seeds + s].val.mean_ccc();
    return acc / static_cast<double>(seeds);
}

const CellResult& AblationResult::cell(const std::string& variant, std::uint64_t seed) const {
    const auto it = std::find(variants.begin(), variants.end(), variant);
    if (it == variants.end()) throw ContractError("unknown ablation variant " + variant);
    const std::size_t index = static_cast<std::size_t>(it - variants.begin());
    const std::size_t seeds = cells.size() / variants.size();
    for (std::size_t s = 0; s < seeds; ++s) {
        if (cells[index * seeds + s].spec.seed == seed) return cells[index * seeds + s];
    }
    throw ContractError("ablation cell not found");
}

// ---- routing report --------------------------------------------------------------------

std::string report_routing_csv(const Model& model, const SplitData& split, double missing_rate,
                               std::uint64_t seed) {
    const int m_count = split.modality_count();
    const auto* full = dynamic_cast<const HiMoeModel*>(&model);
    if (full == nullptr) throw ContractError("routing report needs the full model");
    const int experts = model.config().modality_experts;

    TrainSettings settings;
    settings.missing_rate = missing_rate;
    settings.seed = seed;
    const auto mask = eval_presence_mask(split.rows, m_count, missing_rate, seed, "routing");

    struct PatternStats {
        int rows = 0;
        std::vector<double> gate_sum;    // M x K
        std::vector<double> fusion_sum;  // M
    };
    std::map<std::string, PatternStats> patterns;

    const int batch_size = 256;
    for (int start = 0; start < split.rows; start += batch_size) {
        const int end = std::min(split.rows, start + batch_size);
        std::vector<int> rows(static_cast<std::size_t>(end - start));
        for (int i = start; i < end; ++i) rows[static_cast<std::size_t>(i - start)] = i;
        std::vector<std::uint8_t> override_mask(rows.size() * static_cast<std::size_t>(m_count));
        for (std::size_t i = 0; i < rows.size(); ++i) {
            for (int m = 0; m < m_count; ++m) {
                override_mask[i * static_cast<std::size_t>(m_count) + static_cast<std::size_t>(m)] =
                    mask[static_cast<std::size_t>(rows[i]) * m_count + m];
            }
        }
        const BatchView batch = make_batch(split, rows, &override_mask);
        const ForwardOut out = model.forward(batch);
        for (int r = 0; r < batch.rows; ++r) {
            std::string pattern(static_cast<std::size_t>(m_count), '0');
            for (int m = 0; m < m_count; ++m) {
                if (batch.presence[static_cast<std::size_t>(r) * m_count + m]) pattern[static_cast<std::size_t>(m)] = '1';
            }
            PatternStats& st = patterns[pattern];
            if (st.gate_sum.empty()) {
                st.gate_sum.assign(static_cast<std::size_t>(m_count) * experts, 0.0);
                st.fusion_sum.assign(static_cast<std::size_t>(m_count), 0.0);
            }
            ++st.rows;
            for (int m = 0; m < m_count; ++m) {
                for (int k = 0; k < experts; ++k) {
                    st.gate_sum[static_cast<std::size_t>(m) * experts + k] +=
                        out.gates[static_cast<std::size_t>(m)].at(r, k);
                }
                st.fusion_sum[static_cast<std::size_t>(m)] += out.fusion_weights.at(r, m);
            }
        }
    }

    std::ostringstream os;
    os << "presence_pattern,modality,expert_index,mean_weight\n";
    for (const auto& [pattern, st] : patterns) {
        for (int m = 0; m < m_count; ++m) {
            for (int k = 0; k < experts; ++k) {
                os << pattern << ',' << split.modality_names[static_cast<std::size_t>(m)] << ',' << k << ','
                   << format_g9(st.gate_sum[static_cast<std::size_t>(m) * experts + k] / st.rows) << '\n';
            }
            // expert_index -1 row carries the fusion weight for the modality
            os << pattern << ',' << split.modality_names[static_cast<std::size_t>(m)] << ",-1,"
               << format_g9(st.fusion_sum[static_cast<std::size_t>(m)] / st.rows) << '\n';
        }
    }
    return os.str();
}

// ---- gradcheck ---------------------------------------------------------------------------

namespace {

Tensor random_tensor(std::vector<int> shape, Rng& rng, bool requires_grad) {
    std::size_t n = 1;
    for (const int d : shape) n *= static_cast<std::size_t>(d);
    std::vector<double> data(n);
    for (double& v : data) v = rng.uniform(-1.0, 1.0);
    return Tensor::from_data(std::move(shape), std::move(data), requires_grad);
}

void add_entry(GradcheckReport& report, const std::string& name, const FiniteDiffReport& fd) {
    report.entries.push_back({name, fd});
    if (fd.max_rel_error > report.worst) {
        report.worst = fd.max_rel_error;
        report.worst_name = name;
    }
}

}  // namespace

GradcheckReport gradcheck_all() {
    GradcheckReport report;
    Rng rng(20240601);

    {
        Tensor a = random_tensor({3, 4}, rng, true);
        Tensor b = random_tensor({4, 2}, rng, true);
        add_entry(report, "matmul",
                  finite_diff_check([&] { return sum_all(matmul(a, b)); }, {{"a", a}, {"b", b}}));
    }
    {
        Tensor x = random_tensor({3, 4}, rng, true);
        Tensor w = random_tensor({2, 4}, rng, true);
        Tensor b = random_tensor({2}, rng, true);
        Tensor p = random_tensor({3, 2}, rng, false);
        add_entry(report, "affine", finite_diff_check([&] { return sum_all(mul(affine(x, w, b), p)); },
                                                      {{"x", x}, {"w", w}, {"b", b}}));
    }
    {
        Tensor x = random_tensor({4, 5}, rng, true);
        Tensor p = random_tensor({4, 5}, rng, false);
        add_entry(report, "softmax",
                  finite_diff_check([&] { return sum_all(mul(softmax(x), p)); }, {{"x", x}}));
        add_entry(report, "l2_normalize",
                  finite_diff_check([&] { return sum_all(mul(l2_normalize(x), p)); }, {{"x", x}}));
        add_entry(report, "tanh", finite_diff_check([&] { return sum_all(mul(tanh_op(x), p)); }, {{"x", x}}));
        add_entry(report, "sigmoid",
                  finite_diff_check([&] { return sum_all(mul(sigmoid(x), p)); }, {{"x", x}}));
        add_entry(report, "exp", finite_diff_check([&] { return sum_all(mul(exp_op(x), p)); }, {{"x", x}}));
        add_entry(report, "log", finite_diff_check(
                                     [&] { return sum_all(log_op(add_scalar(mul(x, x), 0.5))); }, {{"x", x}}));
        Tensor c = random_tensor({4, 1}, rng, false);
        add_entry(report, "logsumexp",
                  finite_diff_check([&] { return sum_all(mul(logsumexp_rows(x), c)); }, {{"x", x}}));
    }
    {
        Tensor zi = random_tensor({3, 5}, rng, true);
        Tensor zj = random_tensor({3, 5}, rng, true);
        add_entry(report, "ntxent_loss",
                  finite_diff_check([&] { return ntxent_loss(similarity_matrix(zi, zj, 0.5)); },
                                    {{"zi", zi}, {"zj", zj}}, 1e-5));
    }

    // Small full model: M=2, K=2, L=2, d=4, B=2, regression + binary heads,
    // one absent modality row, one masked label cell, alignment enabled.
    {
        ModelConfig cfg;
        cfg.modality_names = {"a", "b"};
        cfg.input_dims = {6, 6};
        cfg.feature_dim = 4;
        cfg.encoder_hidden = 5;
        cfg.modality_experts = 2;
        cfg.emotion_experts = 2;
        cfg.dim_names = {"valence", "arousal"};
        cfg.head_modes = {HeadMode::kRegression, HeadMode::kBinary};
        HiMoeModel model(cfg, 99);

        BatchView batch;
        batch.rows = 3;
        Rng data_rng(7);
        batch.features.push_back(random_tensor({3, 6}, data_rng, false));
        batch.features.push_back(random_tensor({3, 6}, data_rng, false));
        batch.presence = {1, 1, 1, 0, 1, 1};  // row 1 misses modality a
        batch.labels = {3.0, 7.0, 5.5, 2.0, 8.0, 4.0};
        batch.label_mask = {1, 1, 1, 0, 1, 1};

        TrainSettings settings;
        settings.lambda = 0.3;
        settings.tau = 0.5;
        settings.align_enabled = true;

        add_entry(report, "composite_loss",
                  finite_diff_check([&] { return batch_loss(model, batch, settings); },
                                    model.named_params(), 1e-5));
    }
    return report;
}

std::string GradcheckReport::text() const {
    std::ostringstream os;
    for (const GradcheckEntry& e : entries) {
        os << e.name << ": max_rel_error=" << format_g9(e.report.max_rel_error);
        if (!e.report.worst_param.empty()) {
            os << " (worst " << e.report.worst_param << '[' << e.report.worst_coord
               << "], analytic=" << format_g9(e.report.worst_analytic)
               << ", numeric=" << format_g9(e.report.worst_numeric) << ')';
        }
        os << '\n';
    }
    os << "overall worst: " << format_g9(worst) << " (" << worst_name << ")\n";
    return os.str();
}

}  // namespace himoe
