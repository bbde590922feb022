#include "t2g/mtc.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <string>

#include "t2g/errors.hpp"
#include "t2g/features.hpp"
#include "t2g/numerics.hpp"
#include "t2g/sampling.hpp"

namespace t2g {

void MtcConfig::validate() const {
    if (scale_count < 0) throw DomainError("MtcConfig: scale_count must be >= 0");
    if (!(trim_ratio >= 0.0 && trim_ratio < 1.0))
        throw DomainError("MtcConfig: trim_ratio must lie in [0,1)");
    if (!(decay > 0.0 && decay <= 1.0)) throw DomainError("MtcConfig: decay must lie in (0,1]");
    if (!(weight >= 0.0)) throw DomainError("MtcConfig: weight must be nonnegative");
}

LogitsVolume prob_from_logits(const LogitsVolume& x) {
    if (!x.is_finite()) throw DomainError("prob_from_logits: non-finite logits");
    LogitsVolume p = x;
    std::vector<double> scratch(x.classes);
    for (int b = 0; b < x.batch; ++b) {
        for (int t = 0; t < x.frames; ++t) {
            for (int y = 0; y < x.height; ++y) {
                for (int xx = 0; xx < x.width; ++xx) {
                    for (int k = 0; k < x.classes; ++k) scratch[k] = x.at(b, t, k, y, xx);
                    const std::vector<double> probs = softmax(scratch);
                    for (int k = 0; k < x.classes; ++k) p.at(b, t, k, y, xx) = probs[k];
                }
            }
        }
    }
    return p;
}

DeltaMaps temporal_delta(const LogitsVolume& probs, int stride) {
    if (stride < 1 || stride >= probs.frames)
        throw DomainError("temporal_delta: stride " + std::to_string(stride) +
                          " does not fit a clip of " + std::to_string(probs.frames) + " frames");
    DeltaMaps d;
    d.batch = probs.batch;
    d.pairs = probs.frames - stride;
    d.height = probs.height;
    d.width = probs.width;
    d.values.assign(static_cast<std::size_t>(d.batch) * d.pairs * d.height * d.width, 0.0);
    std::size_t i = 0;
    for (int b = 0; b < d.batch; ++b)
        for (int t = 0; t < d.pairs; ++t)
            for (int y = 0; y < d.height; ++y)
                for (int x = 0; x < d.width; ++x, ++i) {
                    double sum = 0.0;
                    for (int k = 0; k < probs.classes; ++k)
                        sum += std::abs(probs.at(b, t + stride, k, y, x) - probs.at(b, t, k, y, x));
                    d.values[i] = sum;
                }
    return d;
}

StableMask stable_mask(const LabelVideo& y, int stride) {
    if (stride < 1 || stride >= y.frames)
        throw DomainError("stable_mask: stride " + std::to_string(stride) +
                          " does not fit a video of " + std::to_string(y.frames) + " frames");
    StableMask m;
    m.pairs = y.frames - stride;
    m.height = y.height;
    m.width = y.width;
    m.values.assign(static_cast<std::size_t>(m.pairs) * m.height * m.width, 0);
    std::size_t i = 0;
    for (int t = 0; t < m.pairs; ++t)
        for (int yy = 0; yy < m.height; ++yy)
            for (int x = 0; x < m.width; ++x, ++i) {
                const std::uint8_t a = y.at(t, yy, x);
                const std::uint8_t b = y.at(t + stride, yy, x);
                m.values[i] = (a != kIgnoreId && b != kIgnoreId && a == b) ? 1 : 0;
            }
    return m;
}

std::size_t trim_keep_count(std::size_t n, double trim_ratio) {
    if (n == 0) return 0;
    const double raw = (1.0 - trim_ratio) * static_cast<double>(n) + 1e-9;
    const auto kept = static_cast<std::size_t>(std::floor(raw));
    return std::max<std::size_t>(1, std::min(kept, n));
}

std::vector<std::size_t> trim_selection(std::span<const double> values, double trim_ratio) {
    std::vector<std::size_t> order(values.size());
    std::iota(order.begin(), order.end(), 0);
    std::stable_sort(order.begin(), order.end(),
                     [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });
    order.resize(trim_keep_count(values.size(), trim_ratio));
    return order;
}

std::optional<double> trimmed_mean(std::span<const double> values, double trim_ratio) {
    if (!(trim_ratio >= 0.0 && trim_ratio < 1.0))
        throw DomainError("trimmed_mean: trim_ratio must lie in [0,1)");
    if (values.empty()) return std::nullopt;
    const std::vector<std::size_t> kept = trim_selection(values, trim_ratio);
    double sum = 0.0;
    for (std::size_t idx : kept) sum += values[idx];
    return sum / static_cast<double>(kept.size());
}

int auto_scale_count(int frames) {
    if (frames < 2) return 0;
    int count = 1;
    while ((1 << count) <= frames - 1) ++count;
    return count;
}

namespace {

struct ValueRef {
    int b, t, y, x; // pair t covers frames (t, t + stride)
};

struct ScaleValues {
    std::vector<double> deltas;
    std::vector<ValueRef> refs;
};

void check_shapes(const LogitsVolume& x, std::span<const LabelVideo> labels) {
    if (x.classes < 2) throw DomainError("mtc: at least 2 classes required");
    if (static_cast<int>(labels.size()) != x.batch)
        throw ShapeError("mtc: " + std::to_string(labels.size()) + " label videos for batch " +
                         std::to_string(x.batch));
    for (const LabelVideo& v : labels)
        if (v.frames != x.frames || v.height != x.height || v.width != x.width)
            throw ShapeError("mtc: label video shape disagrees with the logits volume");
}

int resolved_scale_count(const LogitsVolume& x, const MtcConfig& cfg) {
    return cfg.scale_count > 0 ? cfg.scale_count : auto_scale_count(x.frames);
}

/// Pools masked delta values for one stride across the whole batch in
/// (batch, pair, y, x) order, recording provenance for the gradient.
ScaleValues collect_scale(const LogitsVolume& probs, std::span<const LabelVideo> labels,
                          int stride, bool want_refs) {
    ScaleValues out;
    for (int b = 0; b < probs.batch; ++b) {
        const StableMask mask = stable_mask(labels[b], stride);
        for (int t = 0; t < mask.pairs; ++t)
            for (int y = 0; y < mask.height; ++y)
                for (int x = 0; x < mask.width; ++x) {
                    if (!mask.at(t, y, x)) continue;
                    double sum = 0.0;
                    for (int k = 0; k < probs.classes; ++k)
                        sum += std::abs(probs.at(b, t + stride, k, y, x) - probs.at(b, t, k, y, x));
                    out.deltas.push_back(sum);
                    if (want_refs) out.refs.push_back({b, t, y, x});
                }
    }
    return out;
}

} // namespace

MtcResult mtc_loss(const LogitsVolume& x, std::span<const LabelVideo> labels,
                   const MtcConfig& cfg) {
    cfg.validate();
    check_shapes(x, labels);
    const LogitsVolume probs = prob_from_logits(x);
    const int scale_count = resolved_scale_count(x, cfg);

    MtcResult result;
    double weighted_sum = 0.0;
    int valid = 0;
    for (int s = 0; s < scale_count; ++s) {
        MtcScaleStat stat;
        stat.scale = s;
        stat.stride = 1 << s;
        if (stat.stride < x.frames) {
            const ScaleValues values = collect_scale(probs, labels, stat.stride, false);
            stat.count = values.deltas.size();
            const std::optional<double> mean = trimmed_mean(values.deltas, cfg.trim_ratio);
            if (mean) {
                stat.trimmed = *mean;
                stat.valid = true;
                weighted_sum += std::pow(cfg.decay, s) * *mean;
                ++valid;
            }
        }
        result.scales.push_back(stat);
    }
    if (valid == 0) {
        result.no_valid_scale = true;
        result.loss = 0.0;
    } else {
        result.loss = weighted_sum / valid;
    }
    return result;
}

MtcResult mtc_loss(const LogitsVolume& x, const LabelVideo& labels, const MtcConfig& cfg) {
    return mtc_loss(x, std::span<const LabelVideo>(&labels, 1), cfg);
}

LogitsVolume mtc_grad(const LogitsVolume& x, std::span<const LabelVideo> labels,
                      const MtcConfig& cfg) {
    cfg.validate();
    check_shapes(x, labels);
    const LogitsVolume probs = prob_from_logits(x);
    const int scale_count = resolved_scale_count(x, cfg);

    // First pass mirrors mtc_loss to fix |S|.
    struct Pending {
        int stride;
        int scale;
        ScaleValues values;
        std::vector<std::size_t> kept;
    };
    std::vector<Pending> pending;
    for (int s = 0; s < scale_count; ++s) {
        const int stride = 1 << s;
        if (stride >= x.frames) continue;
        ScaleValues values = collect_scale(probs, labels, stride, true);
        if (values.deltas.empty()) continue;
        std::vector<std::size_t> kept = trim_selection(values.deltas, cfg.trim_ratio);
        pending.push_back({stride, s, std::move(values), std::move(kept)});
    }

    LogitsVolume grad(x.batch, x.frames, x.classes, x.height, x.width);
    if (pending.empty()) return grad;
    const double scale_norm = static_cast<double>(pending.size());

    // dL/dp accumulated per coordinate, then pushed through the softmax
    // Jacobian once per pixel.
    LogitsVolume weight(x.batch, x.frames, x.classes, x.height, x.width);
    for (const Pending& p : pending) {
        const double coeff = std::pow(cfg.decay, p.scale) /
                             (scale_norm * static_cast<double>(p.kept.size()));
        for (std::size_t idx : p.kept) {
            const ValueRef& ref = p.values.refs[idx];
            for (int k = 0; k < x.classes; ++k) {
                const double diff = probs.at(ref.b, ref.t + p.stride, k, ref.y, ref.x) -
                                    probs.at(ref.b, ref.t, k, ref.y, ref.x);
                const double sign = diff > 0.0 ? 1.0 : (diff < 0.0 ? -1.0 : 0.0);
                weight.at(ref.b, ref.t + p.stride, k, ref.y, ref.x) += coeff * sign;
                weight.at(ref.b, ref.t, k, ref.y, ref.x) -= coeff * sign;
            }
        }
    }

    for (int b = 0; b < x.batch; ++b)
        for (int t = 0; t < x.frames; ++t)
            for (int y = 0; y < x.height; ++y)
                for (int xx = 0; xx < x.width; ++xx) {
                    double dot = 0.0;
                    for (int k = 0; k < x.classes; ++k)
                        dot += weight.at(b, t, k, y, xx) * probs.at(b, t, k, y, xx);
                    for (int k = 0; k < x.classes; ++k)
                        grad.at(b, t, k, y, xx) =
                            probs.at(b, t, k, y, xx) * (weight.at(b, t, k, y, xx) - dot);
                }
    return grad;
}

LogitsVolume mtc_grad(const LogitsVolume& x, const LabelVideo& labels, const MtcConfig& cfg) {
    return mtc_grad(x, std::span<const LabelVideo>(&labels, 1), cfg);
}

FdReport finite_diff_check(const LogitsVolume& x, std::span<const LabelVideo> labels,
                           const MtcConfig& cfg, double eps, int coord_count, std::uint64_t seed) {
    if (!(eps >= 1e-7 && eps <= 1e-3))
        throw DomainError("finite_diff_check: eps must lie in [1e-7, 1e-3]");
    if (coord_count < 1) throw DomainError("finite_diff_check: coord_count must be >= 1");

    LogitsVolume jittered = x;
    const std::uint64_t jitter_key = mix64(seed ^ 0x6A69747465726564ULL);
    for (std::size_t i = 0; i < jittered.data.size(); ++i)
        jittered.data[i] += 1e-3 * unit_from_key(mix64(jitter_key ^ i));

    const LogitsVolume grad = mtc_grad(jittered, labels, cfg);

    Rng rng(seed);
    FdReport report;
    report.coords_checked = coord_count;
    for (int c = 0; c < coord_count; ++c) {
        const std::size_t i = rng.uniform_below(jittered.data.size());
        LogitsVolume probe = jittered;
        probe.data[i] = jittered.data[i] + eps;
        const double up = mtc_loss(probe, labels, cfg).loss;
        probe.data[i] = jittered.data[i] - eps;
        const double down = mtc_loss(probe, labels, cfg).loss;
        const double fd = (up - down) / (2.0 * eps);
        const double abs_dev = std::abs(fd - grad.data[i]);
        const double rel_dev = abs_dev / std::max({std::abs(fd), std::abs(grad.data[i]), 1e-6});
        report.max_abs_dev = std::max(report.max_abs_dev, abs_dev);
        report.max_rel_dev = std::max(report.max_rel_dev, rel_dev);
    }
    return report;
}

} // namespace t2g
