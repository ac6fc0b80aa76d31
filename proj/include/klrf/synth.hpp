#pragma once

#include "klrf/core.hpp"

namespace klrf::synth {

/// Synthetic privileged-information benchmark.
///
/// "Static" classes differ only in where the body sits relative to a bed plane and the floor;
/// their appearance streams share one signal. "Dynamic" classes share a body pose and differ
/// in the temporal frequency of their appearance signal.
struct SynthConfig
{
    int num_classes = 6;
    int sequences_per_class = 50;       // training sequences per class
    int test_sequences_per_class = 50;  // test sequences per class and view
    int frames_per_sequence = 32;
    std::vector<int> kinematic_classes{0, 1, 2};
    std::vector<int> appearance_classes{3, 4, 5};
    double sigma_a = 1.0;               // per-entry appearance noise
    double sigma_k = 0.02;              // per-frame joint noise (metres)
    /// Class-specific appearance offset of the static classes. Zero keeps them indistinguishable
    /// in appearance up to noise.
    double kinematic_appearance_leak = 0.0;
    /// Start each clip at a random point of its action cycle.
    bool random_phase = true;
    int appearance_dim = 8;             // even; channels are mixed pairwise under view changes
    int joint_count = 3;
    int train_subjects = 5;
    int test_subjects = 5;
    /// Camera azimuths in degrees. Training uses the first; the test set holds every view.
    std::vector<double> views{0.0};
    std::uint64_t seed = 0;

    /// Throws ConfigError unless the class subsets partition 0..num_classes-1 and sizes are sane.
    void validate() const;
};

struct SynthData
{
    std::vector<ActionSequence> train;
    std::vector<ActionSequence> test;  // all views; ActionSequence::view holds the azimuth
};

/// Pure function of config (including its seed).
SynthData synth_generate(SynthConfig const & config);

/// Class name of index c: static classes read "cNN_static", dynamic ones "cNN_dynamic".
std::string class_name(SynthConfig const & config, int c);

/// View label used for azimuth `degrees`.
std::string view_label(double degrees);

/// Noise-free rendering of class c under azimuth `degrees` (no subject offset, no noise).
ActionSequence prototype(SynthConfig const & config, int c, double degrees);

} // namespace klrf::synth
