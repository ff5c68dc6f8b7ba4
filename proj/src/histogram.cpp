#include "qdent/histogram.hpp"

#include <cmath>
#include <numeric>
#include <stdexcept>

namespace qdent {

void Binning::validate() const {
    if (!(bin_width_ps > 0.0)) throw std::invalid_argument("bin_width_ps must be > 0");
    if (n_bins < 1) throw std::invalid_argument("n_bins must be >= 1");
    if (!std::isfinite(bin_start_ps))
        throw std::invalid_argument("bin_start_ps must be finite");
}

double CoincidenceHistogram::total() const {
    return std::accumulate(counts.begin(), counts.end(), 0.0);
}

double postselect_counts(const CoincidenceHistogram& hist, double window_start_ps,
                         double window_width_ps) {
    if (!(window_width_ps > 0.0))
        throw std::invalid_argument("window_width_ps must be > 0");
    double lo = window_start_ps;
    double hi = window_start_ps + window_width_ps;
    if (hi <= hist.bin_start_ps || lo >= hist.span_end_ps()) {
        throw std::invalid_argument("postselection window does not overlap histogram");
    }
    double sum = 0.0;
    for (std::size_t i = 0; i < hist.counts.size(); ++i) {
        double c = hist.bin_center(i);
        if (c >= lo && c < hi) sum += hist.counts[i];
    }
    return sum;
}

}  // namespace qdent
