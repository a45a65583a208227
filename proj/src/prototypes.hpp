#ifndef IPKP_PROTOTYPES_HPP
#define IPKP_PROTOTYPES_HPP

#include <array>
#include <string>
#include <vector>

#include "dataset.hpp"
#include "ipkp/tensor.hpp"

namespace ipkp {

// A class rendered as geometry: nodes in unit coordinates (x right, y down,
// both in [0, 1]) joined by straight edges, drawn with round caps and joins at
// a given stroke width (in output pixels).
struct GraphPrototype {
    int label = 0;
    float stroke_width = 2.4f;
    std::vector<std::array<float, 2>> nodes;
    std::vector<std::array<int, 2>> edges;
};

// Prototype images in dataset layout, ordered class-major. After
// augment() each source item owns a contiguous block whose first element is
// the untouched original.
struct PrototypeSet {
    LabeledDataset items;
    const LabeledDataset& as_dataset() const { return items; }
};

// Rasterizes the stroke graph into [1, h, w]: intensity 1 inside the stroke,
// a one-pixel linear falloff at the boundary, 0 outside. Pixels are sampled
// at their centers in coordinates centered on the canvas, so a prototype
// whose geometry is mirror-symmetric renders to a bit-exact mirror-symmetric
// image.
Tensor render_graph(const GraphPrototype& g, int h, int w);

PrototypeSet render_prototypes(const std::vector<GraphPrototype>& protos, int h, int w);

// Text format, one directive per line ('#' starts a comment):
//   class <label>        begins a prototype
//   width <pixels>       stroke width for the current prototype
//   node <x> <y>         adds a node (unit coordinates)
//   stroke <i> <j> ...   polyline through node indices
// Errors carry the line number.
std::vector<GraphPrototype> parse_graph_prototypes(const std::string& text,
                                                   const std::string& origin = "<string>");
std::vector<GraphPrototype> load_graph_prototypes(const std::string& path);

// The built-in digit skeletons (classes 0-9), and the text they parse from.
const char* builtin_digit_prototype_text();
std::vector<GraphPrototype> builtin_digit_prototypes();

// Real items as prototypes: per_class seeded draws from each class.
PrototypeSet sample_prototypes(const LabeledDataset& ds, int per_class, uint64_t seed,
                               int num_classes = 10);

// Per-class pixel means as prototypes.
PrototypeSet mean_image_prototypes(const LabeledDataset& ds, int num_classes = 10);

struct AugmentationConfig {
    enum class Kind { Affine, Perspective };
    Kind kind = Kind::Affine;
    int copies = 16;  // outputs per source item, identity included
    // Affine ranges.
    float scale_lo = 0.9f, scale_hi = 1.1f;
    float translate_frac = 0.1f;  // of canvas size, each axis
    float rotate_deg = 5.0f;
    // Perspective: uniform corner jitter, fraction of canvas size.
    float corner_jitter_frac = 0.15f;

    void validate() const;
};

AugmentationConfig::Kind augmentation_kind_from(const std::string& s);
const char* augmentation_kind_name(AugmentationConfig::Kind k);

// Expands every source item into `copies` variants (the first being the
// original), sampling warp parameters from a stream derived from seed and the
// item index. Out-of-canvas samples read as 0.
PrototypeSet augment(const PrototypeSet& protos, const AugmentationConfig& cfg, uint64_t seed);

// Row-major 3x3 double matrix; enough linear algebra for the warps.
struct Mat3 {
    std::array<double, 9> m{1, 0, 0, 0, 1, 0, 0, 0, 1};
    static Mat3 identity() { return {}; }
    static Mat3 translation(double tx, double ty);
    static Mat3 rotation(double radians);
    static Mat3 scaling(double sx, double sy);
    Mat3 operator*(const Mat3& o) const;
    Mat3 inverse() const;  // throws Error when singular
    // Applies to a homogeneous point and dehomogenizes.
    std::array<double, 2> apply(double x, double y) const;
};

// Homography sending the unit square corners (0,0),(1,0),(1,1),(0,1) to the
// given quad corners, in that order.
Mat3 unit_square_to_quad(const std::array<std::array<double, 2>, 4>& quad);

// Samples src at map(out_pixel) with bilinear filtering; out-of-bounds reads
// are 0. map takes and returns pixel coordinates (column, row at pixel
// centers).
Tensor warp_bilinear(const Tensor& src, const Mat3& out_to_src);

}  // namespace ipkp

#endif
