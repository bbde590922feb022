#include "oracles.hpp"

#include <algorithm>
#include <cmath>

namespace oracle {

t2g::Matrix matmul(const t2g::Matrix& a, const t2g::Matrix& b) {
    t2g::Matrix out(a.rows, b.cols);
    for (int i = 0; i < a.rows; ++i)
        for (int j = 0; j < b.cols; ++j) {
            double acc = 0.0;
            for (int k = 0; k < a.cols; ++k) acc += a.at(i, k) * b.at(k, j);
            out.at(i, j) = acc;
        }
    return out;
}

std::vector<double> softmax_row(const std::vector<double>& v, double scale) {
    double mx = v[0] / scale;
    for (double x : v) mx = std::max(mx, x / scale);
    std::vector<double> out(v.size());
    double sum = 0.0;
    for (std::size_t i = 0; i < v.size(); ++i) {
        out[i] = std::exp(v[i] / scale - mx);
        sum += out[i];
    }
    for (double& x : out) x /= sum;
    return out;
}

std::vector<double> layer_norm(const std::vector<double>& v, const std::vector<double>& gain,
                               const std::vector<double>& bias, double eps) {
    const double n = static_cast<double>(v.size());
    double mean = 0.0;
    for (double x : v) mean += x;
    mean /= n;
    double var = 0.0;
    for (double x : v) var += (x - mean) * (x - mean);
    var /= n;
    std::vector<double> out(v.size());
    for (std::size_t i = 0; i < v.size(); ++i)
        out[i] = (v[i] - mean) / std::sqrt(var + eps) * gain[i] + bias[i];
    return out;
}

t2g::Grid2D bilinear(const t2g::Grid2D& g, int out_h, int out_w) {
    t2g::Grid2D out(out_h, out_w, g.channels);
    for (int y = 0; y < out_h; ++y)
        for (int x = 0; x < out_w; ++x) {
            const double sy = (y + 0.5) * g.height / out_h - 0.5;
            const double sx = (x + 0.5) * g.width / out_w - 0.5;
            const double cy = std::clamp(sy, 0.0, static_cast<double>(g.height - 1));
            const double cx = std::clamp(sx, 0.0, static_cast<double>(g.width - 1));
            const int y0 = static_cast<int>(std::floor(cy));
            const int x0 = static_cast<int>(std::floor(cx));
            const int y1 = std::min(y0 + 1, g.height - 1);
            const int x1 = std::min(x0 + 1, g.width - 1);
            const double fy = cy - y0;
            const double fx = cx - x0;
            for (int c = 0; c < g.channels; ++c) {
                const double top = g.at(y0, x0, c) * (1.0 - fx) + g.at(y0, x1, c) * fx;
                const double bot = g.at(y1, x0, c) * (1.0 - fx) + g.at(y1, x1, c) * fx;
                out.at(y, x, c) = top * (1.0 - fy) + bot * fy;
            }
        }
    return out;
}

std::size_t trim_keep(std::size_t n, int tau_tenths) {
    if (n == 0) return 0;
    const std::size_t kept = n * static_cast<std::size_t>(10 - tau_tenths) / 10;
    return std::max<std::size_t>(1, kept);
}

std::optional<double> trimmed_mean(std::vector<double> values, int tau_tenths) {
    if (values.empty()) return std::nullopt;
    std::sort(values.begin(), values.end());
    const std::size_t keep = trim_keep(values.size(), tau_tenths);
    double sum = 0.0;
    for (std::size_t i = 0; i < keep; ++i) sum += values[i];
    return sum / static_cast<double>(keep);
}

MtcEval mtc(const t2g::LogitsVolume& x, const std::vector<t2g::LabelVideo>& labels,
            int scale_count, int tau_tenths, double decay) {
    // Probabilities via a local softmax, pixel by pixel.
    std::vector<double> probs(x.data.size());
    for (int b = 0; b < x.batch; ++b)
        for (int t = 0; t < x.frames; ++t)
            for (int y = 0; y < x.height; ++y)
                for (int xx = 0; xx < x.width; ++xx) {
                    std::vector<double> v(x.classes);
                    for (int k = 0; k < x.classes; ++k) v[k] = x.at(b, t, k, y, xx);
                    const std::vector<double> p = softmax_row(v, 1.0);
                    for (int k = 0; k < x.classes; ++k) {
                        const std::size_t idx =
                            ((((static_cast<std::size_t>(b) * x.frames + t) * x.classes + k) *
                                  x.height +
                              y) *
                                 x.width +
                             xx);
                        probs[idx] = p[k];
                    }
                }
    const auto p_at = [&](int b, int t, int k, int y, int xx) {
        return probs[((((static_cast<std::size_t>(b) * x.frames + t) * x.classes + k) * x.height +
                       y) *
                          x.width +
                      xx)];
    };

    if (scale_count == 0)
        while (x.frames >= 2 && (1 << scale_count) <= x.frames - 1) ++scale_count;

    MtcEval out;
    double weighted = 0.0;
    int valid = 0;
    for (int s = 0; s < scale_count; ++s) {
        const int stride = 1 << s;
        MtcScale stat;
        stat.stride = stride;
        if (stride < x.frames) {
            std::vector<double> deltas;
            for (int b = 0; b < x.batch; ++b)
                for (int t = 0; t + stride < x.frames; ++t)
                    for (int y = 0; y < x.height; ++y)
                        for (int xx = 0; xx < x.width; ++xx) {
                            const std::uint8_t l0 = labels[b].at(t, y, xx);
                            const std::uint8_t l1 = labels[b].at(t + stride, y, xx);
                            if (l0 == t2g::kIgnoreId || l1 == t2g::kIgnoreId || l0 != l1)
                                continue;
                            double d = 0.0;
                            for (int k = 0; k < x.classes; ++k)
                                d += std::abs(p_at(b, t + stride, k, y, xx) -
                                              p_at(b, t, k, y, xx));
                            deltas.push_back(d);
                        }
            stat.count = deltas.size();
            const std::optional<double> mean = trimmed_mean(deltas, tau_tenths);
            if (mean) {
                stat.trimmed = *mean;
                stat.valid = true;
                weighted += std::pow(decay, s) * *mean;
                ++valid;
            }
        }
        out.scales.push_back(stat);
    }
    if (valid == 0) {
        out.no_valid_scale = true;
        out.loss = 0.0;
    } else {
        out.loss = weighted / valid;
    }
    return out;
}

std::optional<double> vc_dense(const t2g::LabelVideo& pred, const t2g::LabelVideo& gt, int n,
                               bool strict) {
    double sum = 0.0;
    int windows = 0;
    for (int t = 0; t + n <= gt.frames; ++t) {
        std::int64_t denom = 0, num = 0;
        for (int y = 0; y < gt.height; ++y)
            for (int x = 0; x < gt.width; ++x) {
                const std::uint8_t g0 = gt.at(t, y, x);
                bool stable = g0 != t2g::kIgnoreId;
                for (int i = 1; stable && i < n; ++i) stable = gt.at(t + i, y, x) == g0;
                if (!stable) continue;
                ++denom;
                const std::uint8_t p0 = pred.at(t, y, x);
                bool constant = !strict || p0 == g0;
                for (int i = 1; constant && i < n; ++i) constant = pred.at(t + i, y, x) == p0;
                if (constant) ++num;
            }
        if (denom > 0) {
            sum += static_cast<double>(num) / static_cast<double>(denom);
            ++windows;
        }
    }
    if (windows == 0) return std::nullopt;
    return sum / windows;
}

std::optional<double> vc_approx(const t2g::LabelVideo& pred, const t2g::LabelVideo& gt,
                                const std::vector<int>& labeled,
                                const std::vector<t2g::Grid2D>& gray, int n, double theta,
                                bool strict) {
    double sum = 0.0;
    int refs = 0;
    bool usable = false;
    for (int r : labeled) {
        if (r + n > gt.frames) continue;
        usable = true;
        std::int64_t denom = 0, num = 0;
        for (int y = 0; y < gt.height; ++y)
            for (int x = 0; x < gt.width; ++x) {
                const std::uint8_t g0 = gt.at(r, y, x);
                if (g0 == t2g::kIgnoreId) continue;
                bool is_static = true;
                for (int i = 0; is_static && i < n; ++i)
                    is_static =
                        std::abs(gray[r + i].at(y, x, 0) - gray[r].at(y, x, 0)) <= theta;
                if (!is_static) continue;
                ++denom;
                const std::uint8_t p0 = pred.at(r, y, x);
                bool constant = !strict || p0 == g0;
                for (int i = 1; constant && i < n; ++i) constant = pred.at(r + i, y, x) == p0;
                if (constant) ++num;
            }
        if (denom > 0) {
            sum += static_cast<double>(num) / static_cast<double>(denom);
            ++refs;
        }
    }
    if (!usable || refs == 0) return std::nullopt;
    return sum / refs;
}

IouEval miou(const std::vector<t2g::LabelVideo>& pred, const std::vector<t2g::LabelVideo>& gt,
             int class_count) {
    IouEval out;
    out.per_class.assign(class_count, 0.0);
    out.present.assign(class_count, false);
    double sum = 0.0;
    int count = 0;
    for (int k = 0; k < class_count; ++k) {
        std::int64_t g = 0, p = 0, both = 0;
        for (std::size_t v = 0; v < gt.size(); ++v)
            for (std::size_t i = 0; i < gt[v].labels.size(); ++i) {
                const std::uint8_t gv = gt[v].labels[i];
                const std::uint8_t pv = pred[v].labels[i];
                if (gv == t2g::kIgnoreId) continue;
                if (gv == k) ++g;
                if (pv == k) ++p;
                if (gv == k && pv == k) ++both;
            }
        if (g == 0) continue;
        out.present[k] = true;
        out.any_present = true;
        out.per_class[k] = static_cast<double>(both) / static_cast<double>(g + p - both);
        sum += out.per_class[k];
        ++count;
    }
    if (count > 0) out.miou = sum / count;
    return out;
}

t2g::LabelVideo random_label_video(Rng& rng, int frames, int height, int width, int class_count,
                                   double ignore_prob, double flip_prob) {
    t2g::LabelVideo v(frames, height, width);
    for (int y = 0; y < height; ++y)
        for (int x = 0; x < width; ++x) {
            std::uint8_t current = rng.uniform() < ignore_prob
                                       ? t2g::kIgnoreId
                                       : static_cast<std::uint8_t>(rng.below(class_count));
            for (int t = 0; t < frames; ++t) {
                if (t > 0 && rng.uniform() < flip_prob)
                    current = rng.uniform() < ignore_prob
                                  ? t2g::kIgnoreId
                                  : static_cast<std::uint8_t>(rng.below(class_count));
                v.at(t, y, x) = current;
            }
        }
    return v;
}

t2g::LogitsVolume random_logits(Rng& rng, int batch, int frames, int classes, int height,
                                int width, double amplitude) {
    t2g::LogitsVolume x(batch, frames, classes, height, width);
    for (double& v : x.data) v = rng.uniform(-amplitude, amplitude);
    return x;
}

} // namespace oracle
