#include "t2g/features.hpp"

#include <unordered_set>

#include "t2g/errors.hpp"

namespace t2g {

void ScaleSpec::validate() const {
    if (levels.empty()) throw ShapeError("ScaleSpec: no levels");
    std::unordered_set<int> ids;
    for (const ScaleLevel& l : levels) {
        if (l.height < 1 || l.width < 1 || l.channels < 1)
            throw ShapeError("ScaleSpec: level " + std::to_string(l.scale_id) +
                             " has non-positive dimensions");
        if (!ids.insert(l.scale_id).second)
            throw ShapeError("ScaleSpec: duplicate scale_id " + std::to_string(l.scale_id));
    }
}

std::uint64_t mix64(std::uint64_t x) {
    x += 0x9E3779B97F4A7C15ULL;
    x = (x ^ (x >> 30)) * 0xBF58476D1CE4E5B9ULL;
    x = (x ^ (x >> 27)) * 0x94D049BB133111EBULL;
    return x ^ (x >> 31);
}

double unit_from_key(std::uint64_t key) {
    return 2.0 * (static_cast<double>(key >> 11) * 0x1.0p-53) - 1.0;
}

namespace {

std::uint64_t chain(std::uint64_t h, std::uint64_t v) { return mix64(h ^ v); }

std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xCBF29CE484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001B3ULL;
    }
    return h;
}

double token_value(std::uint64_t seed, Branch branch, std::uint64_t frame, int scale_id,
                   std::uint64_t token, std::uint64_t channel) {
    std::uint64_t h = mix64(seed);
    h = chain(h, static_cast<std::uint64_t>(branch));
    h = chain(h, frame);
    h = chain(h, static_cast<std::uint64_t>(scale_id));
    h = chain(h, token);
    h = chain(h, channel);
    return unit_from_key(h);
}

} // namespace

std::vector<TokenGrid> synth_tokens(std::uint64_t seed, int frame_index, Branch branch,
                                    const ScaleSpec& spec, int temporal_period) {
    spec.validate();
    if (frame_index < 0) throw DomainError("synth_tokens: negative frame index");
    if (temporal_period < 1) throw DomainError("synth_tokens: temporal_period must be >= 1");

    std::vector<TokenGrid> out;
    out.reserve(spec.levels.size());
    for (const ScaleLevel& level : spec.levels) {
        TokenGrid grid;
        grid.frame_index = frame_index;
        grid.scale_id = level.scale_id;
        grid.branch = branch;
        grid.height = level.height;
        grid.width = level.width;
        grid.channels = level.channels;
        grid.tokens = Matrix(level.height * level.width, level.channels);
        const int n = grid.tokens.rows;
        for (int tok = 0; tok < n; ++tok) {
            for (int c = 0; c < level.channels; ++c) {
                double v;
                if (temporal_period == 1) {
                    v = token_value(seed, branch, static_cast<std::uint64_t>(frame_index),
                                    level.scale_id, static_cast<std::uint64_t>(tok),
                                    static_cast<std::uint64_t>(c));
                } else {
                    const int k0 = frame_index / temporal_period;
                    const double frac = static_cast<double>(frame_index % temporal_period) /
                                        temporal_period;
                    const double v0 = token_value(seed, branch, static_cast<std::uint64_t>(k0),
                                                  level.scale_id, static_cast<std::uint64_t>(tok),
                                                  static_cast<std::uint64_t>(c));
                    const double v1 = token_value(seed, branch, static_cast<std::uint64_t>(k0 + 1),
                                                  level.scale_id, static_cast<std::uint64_t>(tok),
                                                  static_cast<std::uint64_t>(c));
                    v = v0 * (1.0 - frac) + v1 * frac;
                }
                grid.tokens.at(tok, c) = v;
            }
        }
        out.push_back(std::move(grid));
    }
    return out;
}

TextPrior synth_text_prior(std::uint64_t seed, int class_count, int dim) {
    if (class_count < 1 || dim < 1) throw ShapeError("synth_text_prior: non-positive shape");
    TextPrior prior;
    prior.class_embeddings = Matrix(class_count, dim);
    std::uint64_t h = chain(mix64(seed), fnv1a("text_prior"));
    for (int k = 0; k < class_count; ++k)
        for (int c = 0; c < dim; ++c)
            prior.class_embeddings.at(k, c) = unit_from_key(
                chain(chain(h, static_cast<std::uint64_t>(k)), static_cast<std::uint64_t>(c)));
    prior.context_vector.resize(dim);
    std::uint64_t hc = chain(mix64(seed), fnv1a("text_context"));
    for (int c = 0; c < dim; ++c)
        prior.context_vector[c] = unit_from_key(chain(hc, static_cast<std::uint64_t>(c)));
    return prior;
}

double param_value(std::uint64_t seed, const std::string& name, std::uint64_t index, double limit) {
    std::uint64_t h = chain(mix64(seed), fnv1a(name));
    return limit * unit_from_key(chain(h, index));
}

Grid2D grayscale(const Grid2D& rgb_frame) {
    if (rgb_frame.channels != 3) throw ShapeError("grayscale: expected 3 channels");
    Grid2D out(rgb_frame.height, rgb_frame.width, 1);
    for (int y = 0; y < rgb_frame.height; ++y)
        for (int x = 0; x < rgb_frame.width; ++x)
            out.at(y, x, 0) = 0.299 * rgb_frame.at(y, x, 0) + 0.587 * rgb_frame.at(y, x, 1) +
                              0.114 * rgb_frame.at(y, x, 2);
    return out;
}

} // namespace t2g
