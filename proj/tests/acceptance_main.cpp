// Acceptance suite: one criterion per section, one PASS/FAIL line each.
// Everything runs from scratch (datasets generated in-process); the binary
// exits nonzero if any criterion fails.

#include <chrono>
#include <cmath>
#include <cstring>
#include <filesystem>
#include <fstream>
#include <iostream>
#include <sstream>
#include <vector>

#include "himoe/alignment.hpp"
#include "himoe/config.hpp"
#include "himoe/dataset.hpp"
#include "himoe/experiments.hpp"
#include "himoe/format.hpp"
#include "himoe/metrics.hpp"
#include "himoe/model.hpp"
#include "himoe/train.hpp"

namespace {

using namespace himoe;
using Clock = std::chrono::steady_clock;

int g_failures = 0;

void report(int criterion, const std::string& name, bool pass, const std::string& detail) {
    std::cout << (pass ? "[PASS]" : "[FAIL]") << " criterion " << criterion << " (" << name << "): "
              << detail << std::endl;
    if (!pass) ++g_failures;
}

double seconds_since(Clock::time_point start) {
    return std::chrono::duration<double>(Clock::now() - start).count();
}

// ---- configurations shared by the training criteria --------------------------------

// Desk-scale default: M=4, d=32, K=4, L=6, ~2000 train windows.
GeneratorConfig smoke_generator() {
    GeneratorConfig cfg = GeneratorConfig::default_desk_scale();
    cfg.trials_train = 69;  // 69 trials x 29 windows = 2001 train windows
    cfg.trials_val = 12;
    cfg.trials_test = 12;
    return cfg;
}

RunConfig smoke_run_config() {
    RunConfig cfg;
    cfg.seed = 1;
    cfg.epochs = 30;
    cfg.batch_size = 32;
    cfg.learning_rate = 1e-3;
    cfg.feature_dim = 32;
    cfg.encoder_hidden = 64;
    cfg.modality_experts = 4;
    cfg.emotion_experts = 6;
    cfg.early_stop_patience = 10;
    cfg.loss_lambda = 0.1;
    cfg.align_tau = 0.1;
    return cfg;
}

// Reduced configuration for the sweep criteria: same protocol, smaller nets
// and fewer windows so 140 training cells stay affordable.
GeneratorConfig sweep_generator() {
    GeneratorConfig cfg;
    cfg.modalities = {
        {"eeg", 5, 0, 0.02},
        {"pps", 5, 2, 0.10},
        {"face", 5, 4, 0.18},
        {"audio", 5, 6, 0.30},
    };
    cfg.trials_train = 16;
    cfg.trials_val = 5;
    cfg.trials_test = 6;
    cfg.trial_len_s = 60.0;
    cfg.sample_rate = 4.0;
    cfg.window_s = 3.0;
    cfg.step_s = 1.5;
    return cfg;
}

RunConfig sweep_run_config() {
    RunConfig cfg;
    cfg.seed = 1;
    cfg.epochs = 14;
    cfg.batch_size = 32;
    cfg.learning_rate = 3e-3;
    cfg.feature_dim = 16;
    cfg.encoder_hidden = 32;
    cfg.modality_experts = 4;
    cfg.emotion_experts = 6;
    cfg.early_stop_patience = 0;
    cfg.loss_lambda = 0.1;
    cfg.align_tau = 0.1;
    cfg.sweep_seeds = 5;
    cfg.threads = 0;
    return cfg;
}

// ---- criteria ------------------------------------------------------------------------

void criterion_1_gradient_integrity() {
    const auto start = Clock::now();
    const GradcheckReport report_data = gradcheck_all();
    const double elapsed = seconds_since(start);
    std::ostringstream os;
    os << "max rel error " << format_g9(report_data.worst) << " (" << report_data.worst_name << ") over "
       << report_data.entries.size() << " checks in " << format_g9(elapsed) << " s";
    report(1, "gradient integrity", report_data.pass(1e-4) && elapsed < 60.0, os.str());
}

void criterion_2_routing_invariants() {
    Rng rng(202);
    const int d = 8, k_experts = 4, l_experts = 5;
    ModalityBankParams bank = ModalityBankParams::init("m", d, k_experts, rng);
    {
        auto b = bank.gate_b.mutable_data();
        for (auto& v : b) v = rng.uniform(-1.5, 1.5);
    }
    EmotionBankParams emotion = EmotionBankParams::init(d, l_experts, rng);

    const int total_rows = 100000;
    const int chunk = 2000;
    double worst_alpha = 0.0, worst_beta = 0.0;
    for (int start = 0; start < total_rows; start += chunk) {
        std::vector<double> data(static_cast<std::size_t>(chunk) * d);
        for (auto& v : data) v = rng.uniform(-2, 2);
        const Tensor x = Tensor::from_data({chunk, d}, std::move(data));
        const Tensor alpha = gate_weights(bank, x);
        const EmotionRoute route = da_route(emotion, x);
        for (int r = 0; r < chunk; ++r) {
            double sa = 0.0, sb = 0.0;
            for (int k = 0; k < k_experts; ++k) sa += alpha.at(r, k);
            for (int l = 0; l < l_experts; ++l) sb += route.beta.at(r, l);
            worst_alpha = std::max(worst_alpha, std::abs(sa - 1.0));
            worst_beta = std::max(worst_beta, std::abs(sb - 1.0));
        }
    }
    const bool sums_ok = worst_alpha <= 1e-12 && worst_beta <= 1e-12;

    // zero-input alpha == softmax(bias), bitwise
    const Tensor alpha_zero = gate_weights(bank, Tensor::zeros({4, d}));
    const Tensor bias_softmax = softmax(reshape(bank.gate_b, {1, k_experts}));
    bool bit_ok = true;
    for (int r = 0; r < 4; ++r) {
        for (int k = 0; k < k_experts; ++k) {
            const double a = alpha_zero.at(r, k), b = bias_softmax.at(0, k);
            bit_ok = bit_ok && std::memcmp(&a, &b, sizeof(double)) == 0;
        }
    }

    // expert permutation equivariance (both banks) within 1e-12
    double worst_perm = 0.0;
    {
        std::vector<double> data(static_cast<std::size_t>(64) * d);
        for (auto& v : data) v = rng.uniform(-2, 2);
        const Tensor x = Tensor::from_data({64, d}, std::move(data));
        const std::vector<int> perm = {2, 0, 3, 1};
        ModalityBankParams permuted = ModalityBankParams::init("m", d, k_experts, rng);
        for (int k = 0; k < k_experts; ++k) {
            const auto& src = bank.expert_nets[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
            auto& dst = permuted.expert_nets[static_cast<std::size_t>(k)];
            const auto cp = [](const Tensor& s, Tensor d2) {
                auto out = d2.mutable_data();
                std::copy(s.data().begin(), s.data().end(), out.begin());
            };
            cp(src.w1, dst.w1);
            cp(src.b1, dst.b1);
            cp(src.w2, dst.w2);
            cp(src.b2, dst.b2);
            for (int c = 0; c < d; ++c) {
                permuted.gate_w.mutable_data()[static_cast<std::size_t>(k) * d + c] =
                    bank.gate_w.data()[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)]) * d + c];
            }
            permuted.gate_b.mutable_data()[static_cast<std::size_t>(k)] =
                bank.gate_b.data()[static_cast<std::size_t>(perm[static_cast<std::size_t>(k)])];
        }
        const Tensor out_a = expert_mix(bank, x, gate_weights(bank, x));
        const Tensor out_b = expert_mix(permuted, x, gate_weights(permuted, x));
        for (std::size_t i = 0; i < out_a.numel(); ++i) {
            worst_perm = std::max(worst_perm, std::abs(out_a.data()[i] - out_b.data()[i]));
        }

        const std::vector<int> eperm = {4, 2, 0, 3, 1};
        EmotionBankParams epermuted = EmotionBankParams::init(d, l_experts, rng);
        {
            auto w = epermuted.sim_w.mutable_data();
            std::copy(emotion.sim_w.data().begin(), emotion.sim_w.data().end(), w.begin());
        }
        for (int l = 0; l < l_experts; ++l) {
            const auto& src = emotion.expert_nets[static_cast<std::size_t>(eperm[static_cast<std::size_t>(l)])];
            auto& dst = epermuted.expert_nets[static_cast<std::size_t>(l)];
            const auto cp = [](const Tensor& s, Tensor d2) {
                auto out = d2.mutable_data();
                std::copy(s.data().begin(), s.data().end(), out.begin());
            };
            cp(src.w1, dst.w1);
            cp(src.b1, dst.b1);
            cp(src.w2, dst.w2);
            cp(src.b2, dst.b2);
        }
        const Tensor mix_a = emotion_mix(emotion, da_route(emotion, x));
        const Tensor mix_b = emotion_mix(epermuted, da_route(epermuted, x));
        for (std::size_t i = 0; i < mix_a.numel(); ++i) {
            worst_perm = std::max(worst_perm, std::abs(mix_a.data()[i] - mix_b.data()[i]));
        }
    }

    std::ostringstream os;
    os << "alpha/beta sum error " << format_g9(worst_alpha) << "/" << format_g9(worst_beta)
       << " over 1e5 rows; zero-input bitwise " << (bit_ok ? "yes" : "NO") << "; permutation error "
       << format_g9(worst_perm);
    report(2, "routing invariants", sums_ok && bit_ok && worst_perm <= 1e-12, os.str());
}

void criterion_3_ntxent_closed_forms() {
    double worst = 0.0;
    for (const int b : {2, 4, 8}) {
        std::vector<double> zi(static_cast<std::size_t>(b) * 2 * b, 0.0),
            zj(static_cast<std::size_t>(b) * 2 * b, 0.0);
        for (int r = 0; r < b; ++r) {
            zi[static_cast<std::size_t>(r) * 2 * b + r] = 1.0;
            zj[static_cast<std::size_t>(r) * 2 * b + b + r] = 1.0;
        }
        const double loss = ntxent_loss(similarity_matrix(Tensor::from_data({b, 2 * b}, zi),
                                                          Tensor::from_data({b, 2 * b}, zj), 1.0))
                                .item();
        worst = std::max(worst, std::abs(loss - std::log(2.0 * b - 1.0)));
    }
    for (const int b : {2, 4, 8}) {
        for (const double tau : {0.5, 1.0}) {
            std::vector<double> z(static_cast<std::size_t>(b) * 2 * b, 0.0);
            for (int r = 0; r < b; ++r) z[static_cast<std::size_t>(r) * 2 * b + r] = 1.0;
            const Tensor zt = Tensor::from_data({b, 2 * b}, z);
            const double loss = ntxent_loss(similarity_matrix(zt, zt, tau)).item();
            const double e = std::exp(1.0 / tau);
            const double expected = -std::log(e / (e + 2.0 * b - 2.0));
            worst = std::max(worst, std::abs(loss - expected));
        }
    }
    report(3, "closed-form loss oracles", worst < 1e-9, "max deviation " + format_g9(worst));
}

void criterion_4_metric_oracles() {
    const std::vector<double> x = {0.4, -1.7, 2.2, 0.9, -0.3};
    const bool identity_ok = std::abs(ccc(x, x) - 1.0) < 1e-12;

    const std::vector<double> zm = {-2.0, -0.5, 0.5, 2.0};  // zero mean
    std::vector<double> neg(zm.size());
    for (std::size_t i = 0; i < zm.size(); ++i) neg[i] = -zm[i];
    const bool mirror_ok = std::abs(ccc(zm, neg) + 1.0) < 1e-12;

    const std::vector<double> ramp_p = {1, 2, 3}, ramp_t = {2, 3, 4};
    const bool ramp_ok = std::abs(ccc(ramp_p, ramp_t) - 4.0 / 7.0) < 1e-12;

    Rng rng(404);
    bool lin_ok = true;
    double worst_gap = 0.0;
    for (int trial = 0; trial < 10000; ++trial) {
        const int n = 2 + rng.uniform_int(0, 20);
        std::vector<double> p(static_cast<std::size_t>(n)), t(static_cast<std::size_t>(n));
        const double shift = rng.uniform(-2, 2), sc = rng.uniform(0.2, 3.0);
        for (int i = 0; i < n; ++i) {
            p[static_cast<std::size_t>(i)] = rng.normal(0, 1);
            t[static_cast<std::size_t>(i)] = sc * p[static_cast<std::size_t>(i)] + rng.normal(shift, 1.0);
        }
        const PccResult r = pcc(p, t);
        if (r.degenerate) continue;
        const double gap = std::abs(ccc(p, t)) - std::abs(r.value);
        worst_gap = std::max(worst_gap, gap);
        lin_ok = lin_ok && gap <= 1e-12;
    }
    std::ostringstream os;
    os << "ccc identities " << (identity_ok && mirror_ok && ramp_ok ? "ok" : "BROKEN")
       << "; max |ccc|-|pcc| " << format_g9(worst_gap) << " over 1e4 pairs";
    report(4, "metric oracles", identity_ok && mirror_ok && ramp_ok && lin_ok, os.str());
}

void criterion_5_masking_idempotence() {
    bool all_ok = true;
    std::ostringstream os;
    for (const std::string kind : {"full", "baseline"}) {
        ModelConfig cfg;
        cfg.modality_names = {"a", "b", "c"};
        cfg.input_dims = {10, 10, 10};
        cfg.feature_dim = 6;
        cfg.encoder_hidden = 8;
        cfg.modality_experts = 3;
        cfg.emotion_experts = 3;
        cfg.dim_names = {"valence", "arousal"};
        cfg.head_modes = {HeadMode::kRegression, HeadMode::kRegression};
        const auto model = make_model(kind, cfg, 77);

        Rng rng(1234);
        BatchView batch;
        batch.rows = 8;
        for (int m = 0; m < 3; ++m) {
            std::vector<double> data(static_cast<std::size_t>(batch.rows) * 10);
            for (auto& v : data) v = rng.uniform(-1, 1);
            batch.features.push_back(Tensor::from_data({batch.rows, 10}, std::move(data)));
        }
        batch.presence.assign(static_cast<std::size_t>(batch.rows) * 3, 1);
        for (int r = 0; r < batch.rows; ++r) {
            batch.presence[static_cast<std::size_t>(r) * 3 + r % 3] = 0;  // one absent modality per row
        }
        batch.labels.assign(static_cast<std::size_t>(batch.rows) * 2, 5.0);
        batch.label_mask.assign(static_cast<std::size_t>(batch.rows) * 2, 1);

        const ForwardOut clean = model->forward(batch);

        BatchView garbage = batch;
        for (int m = 0; m < 3; ++m) {
            std::vector<double> data(batch.features[static_cast<std::size_t>(m)].data().begin(),
                                     batch.features[static_cast<std::size_t>(m)].data().end());
            for (int r = 0; r < batch.rows; ++r) {
                if (batch.presence[static_cast<std::size_t>(r) * 3 + m]) continue;
                for (int c = 0; c < 10; ++c) {
                    const double junk[] = {std::nan(""), 1e305, -1e305, 42.0};
                    data[static_cast<std::size_t>(r) * 10 + c] = junk[(r + c) % 4];
                }
            }
            garbage.features[static_cast<std::size_t>(m)] = Tensor::from_data({batch.rows, 10}, std::move(data));
        }
        const ForwardOut dirty = model->forward(garbage);

        bool ok = true;
        for (std::size_t d = 0; d < clean.heads.prediction.size(); ++d) {
            ok = ok && std::memcmp(clean.heads.prediction[d].data().data(),
                                   dirty.heads.prediction[d].data().data(),
                                   clean.heads.prediction[d].numel() * sizeof(double)) == 0;
        }
        ok = ok && std::memcmp(clean.fused.data().data(), dirty.fused.data().data(),
                               clean.fused.numel() * sizeof(double)) == 0;
        os << kind << "=" << (ok ? "bit-identical" : "DIFFERS") << " ";
        all_ok = all_ok && ok;
    }
    report(5, "masking idempotence", all_ok, os.str());
}

void criterion_6_learning_smoke(const std::filesystem::path& workdir) {
    const auto start = Clock::now();
    const DatasetBundle data = generate(smoke_generator(), 2001);
    const RunConfig cfg = smoke_run_config();
    const ModelConfig model_cfg = model_config_for(cfg, data.manifest);
    HiMoeModel model(model_cfg, derive_seed(cfg.seed, "model_init"));
    TrainSettings settings = TrainSettings::from(cfg);
    const TrainResult result = train_model(model, data, settings);
    const double val_ccc = evaluate_split(model, data.val, "val", settings).report.mean_ccc();
    const double elapsed = seconds_since(start);

    // determinism at this scale: two truncated reruns agree bitwise
    TrainSettings short_settings = settings;
    short_settings.epochs = 2;
    short_settings.patience = 0;
    HiMoeModel re1(model_cfg, derive_seed(cfg.seed, "model_init"));
    HiMoeModel re2(model_cfg, derive_seed(cfg.seed, "model_init"));
    const TrainResult t1 = train_model(re1, data, short_settings);
    const TrainResult t2 = train_model(re2, data, short_settings);
    const bool deterministic = t1.log.back().train_loss == t2.log.back().train_loss &&
                               t1.log.back().val_ccc == t2.log.back().val_ccc;

    std::ostringstream os;
    os << "train windows " << data.train.rows << ", best val ccc " << format_g9(result.best_val_ccc)
       << ", final val ccc " << format_g9(val_ccc) << ", " << format_g9(elapsed)
       << " s single-core, deterministic rerun " << (deterministic ? "yes" : "NO");
    report(6, "learning smoke test", val_ccc >= 0.8 && elapsed < 600.0 && deterministic, os.str());
    (void)workdir;
}

void criterion_7_degradation_curve(const std::filesystem::path& workdir) {
    const DatasetBundle data = generate(sweep_generator(), 31337);
    const RunConfig cfg = sweep_run_config();
    const SweepMissingResult sweep = sweep_missing(cfg, data);
    std::ofstream(workdir / "degradation_curve.csv") << sweep.csv;

    // (a) full-model mean CCC non-increasing in r up to one pooled std
    std::vector<double> full_means, full_stds, base_means;
    for (const double r : cfg.missing_rates) {
        full_means.push_back(sweep.mean_ccc("full", r));
        full_stds.push_back(sweep.std_ccc("full", r));
        base_means.push_back(sweep.mean_ccc("baseline", r));
    }
    double pooled = 0.0;
    for (const double s : full_stds) pooled += s * s;
    pooled = std::sqrt(pooled / static_cast<double>(full_stds.size()));
    bool monotone = true;
    for (std::size_t i = 0; i + 1 < full_means.size(); ++i) {
        monotone = monotone && full_means[i + 1] <= full_means[i] + pooled;
    }

    // (b) full beats baseline at every r >= 0.15, and the gap widens
    bool dominates = true;
    for (std::size_t i = 0; i < cfg.missing_rates.size(); ++i) {
        if (cfg.missing_rates[i] >= 0.15 - 1e-12) {
            dominates = dominates && full_means[i] > base_means[i];
        }
    }
    double gap_00 = 0.0, gap_03 = 0.0;
    for (std::size_t i = 0; i < cfg.missing_rates.size(); ++i) {
        if (std::abs(cfg.missing_rates[i] - 0.0) < 1e-9) gap_00 = full_means[i] - base_means[i];
        if (std::abs(cfg.missing_rates[i] - 0.3) < 1e-9) gap_03 = full_means[i] - base_means[i];
    }
    const bool widening = gap_03 > gap_00;

    std::ostringstream os;
    os << "full ccc " << format_g9(full_means.front()) << "->" << format_g9(full_means.back())
       << ", baseline " << format_g9(base_means.front()) << "->" << format_g9(base_means.back())
       << ", pooled std " << format_g9(pooled) << ", gap r=0 " << format_g9(gap_00) << " vs r=0.3 "
       << format_g9(gap_03);
    report(7, "degradation-curve shape", monotone && dominates && widening, os.str());
}

void criterion_8_ablation_direction(const std::filesystem::path& workdir) {
    const DatasetBundle data = generate(sweep_generator(), 31337);
    RunConfig cfg = sweep_run_config();
    cfg.missing_rate = 0.2;  // ablation comparison under moderate masking
    const AblationResult ablation = run_ablations(cfg, data);
    std::ofstream(workdir / "ablation.csv") << ablation.csv;

    const std::size_t seeds = static_cast<std::size_t>(cfg.sweep_seeds);
    bool all_negative = true;
    std::ostringstream os;
    for (const std::string variant : {"no_emotion_bank", "no_alignment", "uniform_routing"}) {
        int wins = 0;
        for (std::size_t s = 0; s < seeds; ++s) {
            const double full = ablation.cells[0 * seeds + s].val.mean_ccc();
            double ablated = 0.0;
            if (variant == "no_emotion_bank") ablated = ablation.cells[1 * seeds + s].val.mean_ccc();
            if (variant == "no_alignment") ablated = ablation.cells[2 * seeds + s].val.mean_ccc();
            if (variant == "uniform_routing") ablated = ablation.cells[3 * seeds + s].val.mean_ccc();
            if (ablated < full) ++wins;
        }
        os << variant << " drop mean " << format_g9(ablation.mean_ccc("full") - ablation.mean_ccc(variant))
           << " sign " << wins << "/" << seeds << "; ";
        all_negative = all_negative && wins == static_cast<int>(seeds);
    }
    report(8, "ablation direction", all_negative, os.str());
}

void criterion_9_expert_count_sweep(const std::filesystem::path& workdir) {
    const DatasetBundle data = generate(sweep_generator(), 31337);
    RunConfig cfg = sweep_run_config();
    cfg.missing_rate = 0.1;
    const SweepExpertsResult sweep = sweep_experts(cfg, data);
    std::ofstream(workdir / "expert_sweep.csv") << sweep.csv;

    double best = -2.0;
    int best_l = 0;
    for (const int l : cfg.expert_counts) {
        const double mean = sweep.mean_ccc(l);
        if (mean > best) {
            best = mean;
            best_l = l;
        }
    }
    const double at_one = sweep.mean_ccc(1);
    const double pooled = sweep.pooled_std();
    const bool margin_ok = best - at_one > pooled;
    std::ostringstream os;
    os << "best L=" << best_l << " ccc " << format_g9(best) << " vs L=1 " << format_g9(at_one)
       << ", margin " << format_g9(best - at_one) << " > pooled std " << format_g9(pooled) << "?";
    report(9, "expert-count sweep", margin_ok && best_l != 1, os.str());
}

void criterion_10_reproducibility(const std::filesystem::path& workdir) {
    // (a) identical config + seed => byte-identical metrics.csv
    GeneratorConfig gen = sweep_generator();
    gen.trials_train = 6;
    gen.trials_val = 3;
    gen.trials_test = 3;
    const DatasetBundle data = generate(gen, 555);
    RunConfig cfg = sweep_run_config();
    cfg.epochs = 4;
    cfg.missing_rate = 0.15;

    const auto run_once = [&] {
        const ModelConfig model_cfg = model_config_for(cfg, data.manifest);
        HiMoeModel model(model_cfg, derive_seed(cfg.seed, "model_init"));
        TrainSettings settings = TrainSettings::from(cfg);
        train_model(model, data, settings);
        const MetricsReport val = evaluate_split(model, data.val, "val", settings).report;
        const MetricsReport test = evaluate_split(model, data.test, "test", settings).report;
        return metrics_csv({val, test});
    };
    const std::string csv1 = run_once();
    const std::string csv2 = run_once();
    const bool bytes_ok = csv1 == csv2;
    std::ofstream(workdir / "metrics.csv") << csv1;

    // (b) round-trip identity on a >= 1e6 cell bundle
    GeneratorConfig big = GeneratorConfig::default_desk_scale();
    big.trials_train = 40;
    big.trials_val = 5;
    big.trials_test = 5;
    const DatasetBundle bundle = generate(big, 888);
    const std::size_t cells = bundle.total_cells();
    const auto dir = workdir / "roundtrip_bundle";
    write_dataset(bundle, dir.string());
    const DatasetBundle back = read_dataset(dir.string());
    const bool roundtrip_ok = split_equal(bundle.train, back.train) &&
                              split_equal(bundle.val, back.val) && split_equal(bundle.test, back.test) &&
                              cells >= 1000000;
    std::filesystem::remove_all(dir);

    std::ostringstream os;
    os << "metrics.csv bytes " << (bytes_ok ? "identical" : "DIFFER") << "; round-trip on "
       << cells << " cells " << (roundtrip_ok ? "exact" : "BROKEN");
    report(10, "reproducibility", bytes_ok && roundtrip_ok, os.str());
}

}  // namespace

int main() {
    const auto started = Clock::now();
    const auto workdir = std::filesystem::temp_directory_path() / "himoe_acceptance";
    std::filesystem::create_directories(workdir);

    criterion_1_gradient_integrity();
    criterion_2_routing_invariants();
    criterion_3_ntxent_closed_forms();
    criterion_4_metric_oracles();
    criterion_5_masking_idempotence();
    criterion_6_learning_smoke(workdir);
    criterion_7_degradation_curve(workdir);
    criterion_8_ablation_direction(workdir);
    criterion_9_expert_count_sweep(workdir);
    criterion_10_reproducibility(workdir);

    std::cout << (g_failures == 0 ? "ALL CRITERIA PASSED" : "FAILURES: " + std::to_string(g_failures))
              << " (total " << format_g9(seconds_since(started)) << " s, artifacts in " << workdir.string()
              << ")" << std::endl;
    return g_failures == 0 ? 0 : 1;
}
