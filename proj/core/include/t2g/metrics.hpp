#pragma once

#include <cstdint>
#include <span>
#include <vector>

#include "t2g/decoder.hpp"
#include "t2g/labels.hpp"
#include "t2g/numerics.hpp"

namespace t2g {

/// Integer confusion counts, rows = ground truth, cols = prediction. One
/// extra column holds pixels whose prediction is the ignore id (possible
/// after remapping); they count as false negatives of the GT class. Pixels
/// with GT = ignore are skipped entirely.
struct ConfusionMatrix {
    int classes = 0;
    std::vector<std::int64_t> counts; // classes x (classes + 1)

    ConfusionMatrix() = default;
    explicit ConfusionMatrix(int k);

    std::int64_t at(int gt, int pred) const {
        return counts[static_cast<std::size_t>(gt) * (classes + 1) + pred];
    }
    std::int64_t& at(int gt, int pred) {
        return counts[static_cast<std::size_t>(gt) * (classes + 1) + pred];
    }
    int invalid_column() const { return classes; }
    std::int64_t total() const;
    void merge(const ConfusionMatrix& other);
};

/// Adds one video's pixels to acc. Labels must be < class_count or the
/// ignore id; anything else raises DataError naming the pixel.
void accumulate_confusion(const LabelVideo& pred, const LabelVideo& gt, int class_count,
                          ConfusionMatrix& acc, std::uint8_t ignore_id = kIgnoreId);

/// Per-class IoU with absent-class exclusion: classes without any GT pixel
/// (zero row) are left out of the mean. All classes absent raises DataError.
struct IouReport {
    std::vector<double> per_class; // valid where present[k]
    std::vector<bool> present;
    double miou = 0.0;
};
IouReport miou(const ConfusionMatrix& conf);

/// One video's evaluation inputs. gt is dense for the dense protocol; for
/// the approx protocol only the labeled_frames of gt need real labels and
/// gray must hold every frame (H x W x 1).
struct VideoEval {
    LabelVideo pred;
    LabelVideo gt;
    std::vector<int> labeled_frames;
    std::vector<Grid2D> gray;
};

/// 1 where |gray_i - gray_r| <= theta, else 0, in the frames' native range.
std::vector<std::uint8_t> static_mask(const Grid2D& gray_r, const Grid2D& gray_i, double theta);

/// Dense-GT video consistency for window size n: over every window of n
/// consecutive frames, the fraction of pixels that are GT-valid and
/// GT-constant across the window whose prediction is also constant.
/// Windows with an empty denominator are skipped; if every window is empty,
/// or the video is shorter than n, raises ProtocolError. strict_match
/// additionally requires the constant prediction to equal the GT label.
double vc_dense(const VideoEval& v, int n, bool strict_match = false);

/// Sparse-GT video consistency: like vc_dense but anchored at each labeled
/// reference frame r with the window [r, r+n), using grayscale static masks
/// |gray_i - gray_r| <= theta in place of dense GT stability.
double vc_approx(const VideoEval& v, int n, double theta, bool strict_match = false);

/// Unweighted mean over per-video consistency values.
double mvc(std::span<const double> per_video);

/// Argmax class per pixel for one batch entry; ties keep the lowest class.
LabelVideo argmax_labels(const LogitsVolume& logits, int batch_index = 0);

} // namespace t2g
