#include "t2g/metrics.hpp"

#include <cmath>
#include <string>

#include "t2g/errors.hpp"

namespace t2g {

ConfusionMatrix::ConfusionMatrix(int k)
    : classes(k), counts(static_cast<std::size_t>(k) * (k + 1), 0) {
    if (k < 1) throw ShapeError("ConfusionMatrix: class count must be >= 1");
}

std::int64_t ConfusionMatrix::total() const {
    std::int64_t sum = 0;
    for (std::int64_t c : counts) sum += c;
    return sum;
}

void ConfusionMatrix::merge(const ConfusionMatrix& other) {
    if (other.classes != classes) throw ShapeError("ConfusionMatrix::merge: class count mismatch");
    for (std::size_t i = 0; i < counts.size(); ++i) counts[i] += other.counts[i];
}

void accumulate_confusion(const LabelVideo& pred, const LabelVideo& gt, int class_count,
                          ConfusionMatrix& acc, std::uint8_t ignore_id) {
    if (pred.frames != gt.frames || pred.height != gt.height || pred.width != gt.width)
        throw ShapeError("accumulate_confusion: prediction/GT shapes disagree");
    if (acc.classes != class_count)
        throw ShapeError("accumulate_confusion: accumulator built for a different class count");
    for (int t = 0; t < gt.frames; ++t) {
        for (int y = 0; y < gt.height; ++y) {
            for (int x = 0; x < gt.width; ++x) {
                const std::uint8_t g = gt.at(t, y, x);
                if (g == ignore_id) continue;
                if (g >= class_count)
                    throw DataError("accumulate_confusion: GT label " + std::to_string(g) +
                                    " out of range at frame " + std::to_string(t) + " pixel (" +
                                    std::to_string(y) + "," + std::to_string(x) + ")");
                const std::uint8_t p = pred.at(t, y, x);
                if (p != ignore_id && p >= class_count)
                    throw DataError("accumulate_confusion: predicted label " + std::to_string(p) +
                                    " out of range at frame " + std::to_string(t) + " pixel (" +
                                    std::to_string(y) + "," + std::to_string(x) + ")");
                acc.at(g, p == ignore_id ? acc.invalid_column() : p) += 1;
            }
        }
    }
}

IouReport miou(const ConfusionMatrix& conf) {
    IouReport report;
    report.per_class.assign(conf.classes, 0.0);
    report.present.assign(conf.classes, false);
    double sum = 0.0;
    int present_count = 0;
    for (int k = 0; k < conf.classes; ++k) {
        std::int64_t row = 0;
        for (int p = 0; p <= conf.classes; ++p) row += conf.at(k, p);
        if (row == 0) continue; // class absent from GT: excluded from the mean
        const std::int64_t tp = conf.at(k, k);
        std::int64_t fp = 0;
        for (int g = 0; g < conf.classes; ++g)
            if (g != k) fp += conf.at(g, k);
        const std::int64_t fn = row - tp;
        report.present[k] = true;
        report.per_class[k] = static_cast<double>(tp) / static_cast<double>(tp + fp + fn);
        sum += report.per_class[k];
        ++present_count;
    }
    if (present_count == 0) throw DataError("miou: no class has ground-truth pixels");
    report.miou = sum / present_count;
    return report;
}

std::vector<std::uint8_t> static_mask(const Grid2D& gray_r, const Grid2D& gray_i, double theta) {
    if (gray_r.height != gray_i.height || gray_r.width != gray_i.width ||
        gray_r.channels != 1 || gray_i.channels != 1)
        throw ShapeError("static_mask: expects matching single-channel frames");
    if (!(theta >= 0.0)) throw DomainError("static_mask: theta must be >= 0");
    std::vector<std::uint8_t> mask(static_cast<std::size_t>(gray_r.height) * gray_r.width, 0);
    for (int y = 0; y < gray_r.height; ++y)
        for (int x = 0; x < gray_r.width; ++x)
            mask[static_cast<std::size_t>(y) * gray_r.width + x] =
                std::abs(gray_i.at(y, x, 0) - gray_r.at(y, x, 0)) <= theta ? 1 : 0;
    return mask;
}

namespace {

void check_video_shapes(const VideoEval& v) {
    if (v.pred.frames != v.gt.frames || v.pred.height != v.gt.height ||
        v.pred.width != v.gt.width)
        throw ShapeError("video eval: prediction/GT shapes disagree");
}

bool pred_constant(const LabelVideo& pred, int start, int n, int y, int x, std::uint8_t* value) {
    const std::uint8_t first = pred.at(start, y, x);
    for (int i = 1; i < n; ++i)
        if (pred.at(start + i, y, x) != first) return false;
    *value = first;
    return true;
}

} // namespace

double vc_dense(const VideoEval& v, int n, bool strict_match) {
    check_video_shapes(v);
    if (n < 1) throw DomainError("vc_dense: window size must be >= 1");
    if (v.pred.frames < n)
        throw ProtocolError("vc_dense: video of " + std::to_string(v.pred.frames) +
                            " frames is shorter than the window " + std::to_string(n));
    double ratio_sum = 0.0;
    int window_count = 0;
    for (int t = 0; t + n <= v.pred.frames; ++t) {
        std::int64_t denom = 0;
        std::int64_t num = 0;
        for (int y = 0; y < v.pred.height; ++y) {
            for (int x = 0; x < v.pred.width; ++x) {
                const std::uint8_t g = v.gt.at(t, y, x);
                if (g == kIgnoreId) continue;
                bool stable = true;
                for (int i = 1; i < n; ++i)
                    if (v.gt.at(t + i, y, x) != g) {
                        stable = false;
                        break;
                    }
                if (!stable) continue;
                ++denom;
                std::uint8_t p = 0;
                if (pred_constant(v.pred, t, n, y, x, &p) && (!strict_match || p == g)) ++num;
            }
        }
        if (denom == 0) continue;
        ratio_sum += static_cast<double>(num) / static_cast<double>(denom);
        ++window_count;
    }
    if (window_count == 0)
        throw ProtocolError("vc_dense: every window has an empty denominator");
    return ratio_sum / window_count;
}

double vc_approx(const VideoEval& v, int n, double theta, bool strict_match) {
    check_video_shapes(v);
    if (n < 1) throw DomainError("vc_approx: window size must be >= 1");
    if (static_cast<int>(v.gray.size()) != v.pred.frames)
        throw ShapeError("vc_approx: need one grayscale frame per video frame");
    if (v.labeled_frames.empty())
        throw ProtocolError("vc_approx: no labeled reference frames");

    double ratio_sum = 0.0;
    int ref_count = 0;
    bool any_usable = false;
    for (int r : v.labeled_frames) {
        if (r < 0 || r >= v.pred.frames)
            throw DataError("vc_approx: labeled frame " + std::to_string(r) + " out of range");
        if (r + n > v.pred.frames) continue; // window does not fit
        any_usable = true;

        // Intersection of static masks over the window, anchored at r.
        std::vector<std::uint8_t> static_all(
            static_cast<std::size_t>(v.pred.height) * v.pred.width, 1);
        for (int i = 1; i < n; ++i) {
            const std::vector<std::uint8_t> m = static_mask(v.gray[r], v.gray[r + i], theta);
            for (std::size_t j = 0; j < m.size(); ++j) static_all[j] &= m[j];
        }

        std::int64_t denom = 0;
        std::int64_t num = 0;
        for (int y = 0; y < v.pred.height; ++y) {
            for (int x = 0; x < v.pred.width; ++x) {
                const std::uint8_t g = v.gt.at(r, y, x);
                if (g == kIgnoreId) continue;
                if (!static_all[static_cast<std::size_t>(y) * v.pred.width + x]) continue;
                ++denom;
                std::uint8_t p = 0;
                if (pred_constant(v.pred, r, n, y, x, &p) && (!strict_match || p == g)) ++num;
            }
        }
        if (denom == 0) continue;
        ratio_sum += static_cast<double>(num) / static_cast<double>(denom);
        ++ref_count;
    }
    if (!any_usable)
        throw ProtocolError("vc_approx: no labeled frame admits a window of " + std::to_string(n));
    if (ref_count == 0)
        throw ProtocolError("vc_approx: every usable reference has an empty denominator");
    return ratio_sum / ref_count;
}

double mvc(std::span<const double> per_video) {
    if (per_video.empty()) throw DomainError("mvc: no videos");
    double sum = 0.0;
    for (double v : per_video) sum += v;
    return sum / static_cast<double>(per_video.size());
}

LabelVideo argmax_labels(const LogitsVolume& logits, int batch_index) {
    if (batch_index < 0 || batch_index >= logits.batch)
        throw ShapeError("argmax_labels: batch index out of range");
    if (logits.classes >= kIgnoreId)
        throw DomainError("argmax_labels: class count collides with the ignore id");
    LabelVideo out(logits.frames, logits.height, logits.width);
    for (int t = 0; t < logits.frames; ++t)
        for (int y = 0; y < logits.height; ++y)
            for (int x = 0; x < logits.width; ++x) {
                int best = 0;
                double best_v = logits.at(batch_index, t, 0, y, x);
                for (int k = 1; k < logits.classes; ++k) {
                    const double v = logits.at(batch_index, t, k, y, x);
                    if (v > best_v) {
                        best_v = v;
                        best = k;
                    }
                }
                out.at(t, y, x) = static_cast<std::uint8_t>(best);
            }
    return out;
}

} // namespace t2g
