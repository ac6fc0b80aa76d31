#pragma once

#include "klrf/core.hpp"
#include "klrf/rng.hpp"

namespace klrf::features {

enum class CueKind { Depth, Layout, Skeleton };

/// Per-frame cue values: one row per frame.
struct CueMatrix
{
    CueKind kind = CueKind::Depth;
    Matrix values;
};

/// Side length of the fallback depth descriptor grid.
inline constexpr int kFallbackGrid = 16;

/// Perpendicular displacements of every joint to every plane, ordered joint-major:
/// [d_11; ...; d_1L; d_21; ...; d_PL], each d = (n . p - offset) n.
std::vector<double> layout_cue(SkeletonFrame const & frame, std::span<const LayoutPlane> planes);

/// [pairwise (p < q); motion vs previous frame; offset vs first frame], 3 values per entry.
std::vector<double> skeleton_cue(SkeletonFrame const & frame, SkeletonFrame const & previous,
                                 SkeletonFrame const & first);

/// 16x16 block-averaged, min-max normalized depth grid (256 values).
std::vector<double> depth_cue_fallback(DepthFrame const & frame);

/// Temporal pyramid of low-frequency DFT magnitudes. Level i (1-based) splits the time axis
/// into 2^(i-1) contiguous segments, the last one absorbing the remainder. Output is ordered
/// (level, segment, dimension, frequency) and has d * k * (2^levels - 1) entries.
std::vector<double> fourier_encode(Matrix const & cue, int levels, int k);

/// Output length of fourier_encode for a d-dimensional cue.
std::size_t fourier_length(std::size_t d, int levels, int k);

CueMatrix depth_cues(ActionSequence const & sequence);
CueMatrix layout_cues(ActionSequence const & sequence);
CueMatrix skeleton_cues(ActionSequence const & sequence);

/// Builds A(V) and, when the sequence carries skeletons and planes, K(V) = [layout; skeleton].
/// Throws DataError when there is no appearance source. The label index is left at -1.
Sample assemble_features(ActionSequence const & sequence, KLRFConfig const & config);

/// Synthetic variants of a training sequence (the original is not included). Rotations and
/// translations act on skeletons and planes only; temporal offsets rotate every per-frame
/// stream cyclically. Variants keep the label and augmentation group of the original.
std::vector<ActionSequence> augment(ActionSequence const & sequence, AugmentationConfig const & config, Rng & rng);

/// Temporal-offset variant: frames reordered as [o, o+1, ..., T-1, 0, ..., o-1], with o clamped to T-1.
ActionSequence temporal_offset(ActionSequence const & sequence, int offset);

/// Rigid rotation (axis, angle in radians) about `center`, applied to joints and planes.
ActionSequence rotate(ActionSequence const & sequence, std::array<double, 3> const & axis, double angle,
                      Joint3 const & center);

/// Adds `delta` to every joint; planes are left untouched.
ActionSequence translate_joints(ActionSequence const & sequence, Joint3 const & delta);

/// Mean of all joints over all frames.
Joint3 scene_centroid(ActionSequence const & sequence);

} // namespace klrf::features
