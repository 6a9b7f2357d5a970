#pragma once

#include <cstdint>
#include <functional>
#include <iosfwd>
#include <span>
#include <string>
#include <vector>

#include "gisad/anomaly.hpp"
#include "gisad/events.hpp"
#include "gisad/jets.hpp"

namespace gisad {

/// Shortest decimal text that parses back to exactly v.
std::string format_double(double v);

/// Header `event_id,<conditional>,<features...>`; values in shortest
/// round-trip form.
void write_features_csv(std::ostream& os, const EventTable& events);
/// Reads the format above. The second column is the conditional. Throws
/// InputError with the line number on malformed rows.
EventTable read_features_csv(std::istream& is);

void write_labels_csv(std::ostream& os, std::span<const std::int64_t> ids,
                      std::span<const std::uint8_t> is_signal);
std::vector<std::uint8_t> read_labels_csv(std::istream& is, std::span<const std::int64_t> ids);

/// Streams `event_id,pt,eta,phi[,mass]`. Rows of one event must be
/// contiguous; each event is handed to on_event as soon as it is complete.
/// Returns the number of data rows read.
std::size_t read_particles_csv(
    std::istream& is,
    const std::function<void(std::int64_t, std::span<const Particle>)>& on_event);

void write_particles_csv(std::ostream& os, std::int64_t event_id,
                         std::span<const Particle> particles);

/// `event_id,m,alpha,p_signal,p_background,clamped_flag`; m is the conditional.
void write_scores_csv(std::ostream& os, const EventTable& events, const AnomalyReport& report);

/// `m_lo,m_hi,count,alpha_max,alpha_p99`; empty fields for empty bins.
void write_scan_csv(std::ostream& os, const std::vector<ScanBin>& scan);

}  // namespace gisad
