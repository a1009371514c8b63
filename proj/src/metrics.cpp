#include "himoe/metrics.hpp"

#include <cmath>
#include <sstream>

#include "himoe/errors.hpp"
#include "himoe/format.hpp"

namespace himoe {

namespace {

constexpr double kVarEps = 1e-12;

struct Moments {
    double mean_p = 0.0, mean_t = 0.0;
    double var_p = 0.0, var_t = 0.0;  // population variances
    double cov = 0.0;
};

Moments moments(std::span<const double> p, std::span<const double> t) {
    const std::size_t n = p.size();
    Moments m;
    for (std::size_t i = 0; i < n; ++i) {
        m.mean_p += p[i];
        m.mean_t += t[i];
    }
    m.mean_p /= static_cast<double>(n);
    m.mean_t /= static_cast<double>(n);
    for (std::size_t i = 0; i < n; ++i) {
        const double dp = p[i] - m.mean_p;
        const double dt = t[i] - m.mean_t;
        m.var_p += dp * dp;
        m.var_t += dt * dt;
        m.cov += dp * dt;
    }
    m.var_p /= static_cast<double>(n);
    m.var_t /= static_cast<double>(n);
    m.cov /= static_cast<double>(n);
    return m;
}

void check_lengths(std::span<const double> p, std::span<const double> t, const char* op) {
    if (p.size() != t.size()) {
        throw ContractError(std::string(op) + ": length mismatch " + std::to_string(p.size()) + " vs " +
                            std::to_string(t.size()));
    }
}

}  // namespace

double ccc(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred, truth, "ccc");
    if (pred.size() < 2) throw ContractError("ccc: need at least 2 samples");
    const Moments m = moments(pred, truth);
    const double gap = m.mean_p - m.mean_t;
    const double denom = m.var_p + m.var_t + gap * gap;
    if (denom < kVarEps) return 0.0;
    return 2.0 * m.cov / denom;
}

PccResult pcc(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred, truth, "pcc");
    if (pred.size() < 2) throw ContractError("pcc: need at least 2 samples");
    const Moments m = moments(pred, truth);
    if (m.var_p < kVarEps || m.var_t < kVarEps) return {0.0, true};
    return {m.cov / std::sqrt(m.var_p * m.var_t), false};
}

double mae(std::span<const double> pred, std::span<const double> truth) {
    check_lengths(pred, truth, "mae");
    if (pred.empty()) throw ContractError("mae: empty input");
    double acc = 0.0;
    for (std::size_t i = 0; i < pred.size(); ++i) acc += std::abs(pred[i] - truth[i]);
    return acc / static_cast<double>(pred.size());
}

AccF1 acc_f1(std::span<const double> probs, std::span<const double> truth) {
    check_lengths(probs, truth, "acc_f1");
    if (probs.empty()) throw ContractError("acc_f1: empty input");
    std::size_t tp = 0, fp = 0, fn = 0, tn = 0;
    for (std::size_t i = 0; i < probs.size(); ++i) {
        const bool p = probs[i] >= 0.5;
        const bool t = truth[i] >= 0.5;
        if (p && t)
            ++tp;
        else if (p && !t)
            ++fp;
        else if (!p && t)
            ++fn;
        else
            ++tn;
    }
    AccF1 out;
    out.acc = static_cast<double>(tp + tn) / static_cast<double>(probs.size());
    const double denom = static_cast<double>(2 * tp + fp + fn);
    out.f1 = denom > 0.0 ? 2.0 * static_cast<double>(tp) / denom : 0.0;
    return out;
}

double MetricsReport::mean_ccc() const {
    double acc = 0.0;
    for (const auto& d : per_dimension) acc += d.ccc;
    return per_dimension.empty() ? 0.0 : acc / static_cast<double>(per_dimension.size());
}

double MetricsReport::mean_pcc() const {
    double acc = 0.0;
    for (const auto& d : per_dimension) acc += d.pcc;
    return per_dimension.empty() ? 0.0 : acc / static_cast<double>(per_dimension.size());
}

double MetricsReport::mean_mae() const {
    double acc = 0.0;
    for (const auto& d : per_dimension) acc += d.mae;
    return per_dimension.empty() ? 0.0 : acc / static_cast<double>(per_dimension.size());
}

std::string metrics_csv(const std::vector<MetricsReport>& reports) {
    std::ostringstream os;
    os << "split,dimension,ccc,pcc,mae,acc,f1,seed,missing_rate\n";
    for (const MetricsReport& r : reports) {
        for (const DimensionMetrics& d : r.per_dimension) {
            os << r.split << ',' << d.dimension << ',' << format_g9(d.ccc) << ',' << format_g9(d.pcc)
               << ',' << format_g9(d.mae) << ',';
            if (d.has_binary) os << format_g9(d.acc);
            os << ',';
            if (d.has_binary) os << format_g9(d.f1);
            os << ',' << r.seed << ',' << format_g9(r.missing_rate) << '\n';
        }
        os << r.split << ",mean," << format_g9(r.mean_ccc()) << ',' << format_g9(r.mean_pcc()) << ','
           << format_g9(r.mean_mae()) << ",,," << r.seed << ',' << format_g9(r.missing_rate) << '\n';
    }
    return os.str();
}

}  // namespace himoe
