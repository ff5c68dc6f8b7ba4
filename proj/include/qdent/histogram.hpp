#pragma once

#include <string>
#include <vector>

namespace qdent {

struct Binning {
    double bin_width_ps = 16.0;
    double bin_start_ps = 0.0;
    int n_bins = 128;

    void validate() const;  // throws std::invalid_argument
    double span_end_ps() const { return bin_start_ps + bin_width_ps * n_bins; }
};

// Binned coincidence counts vs photon-pair delay. Counts are expected
// values (reals) in analytic mode and whole numbers in sampled mode.
struct CoincidenceHistogram {
    double bin_width_ps = 0.0;
    double bin_start_ps = 0.0;
    std::vector<double> counts;
    std::string setting_label;

    double bin_center(std::size_t i) const {
        return bin_start_ps + (static_cast<double>(i) + 0.5) * bin_width_ps;
    }
    double span_end_ps() const {
        return bin_start_ps + bin_width_ps * static_cast<double>(counts.size());
    }
    double total() const;
};

// Sum of counts whose bin centers fall in [window_start, window_start + width).
// The window must overlap the histogram span.
double postselect_counts(const CoincidenceHistogram& hist, double window_start_ps,
                         double window_width_ps);

}  // namespace qdent
