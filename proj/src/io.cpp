#include "gisad/io.hpp"

#include <charconv>
#include <cmath>
#include <istream>
#include <ostream>
#include <string_view>
#include <unordered_set>

#include "gisad/errors.hpp"

namespace gisad {

namespace {

std::vector<std::string_view> split(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  for (;;) {
    const std::size_t comma = line.find(',', start);
    out.push_back(line.substr(start, comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  return out;
}

std::string_view trim(std::string_view s) {
  while (!s.empty() && (s.front() == ' ' || s.front() == '\t')) s.remove_prefix(1);
  while (!s.empty() && (s.back() == ' ' || s.back() == '\t' || s.back() == '\r')) {
    s.remove_suffix(1);
  }
  return s;
}

[[noreturn]] void fail(std::size_t line_no, const std::string& what) {
  throw InputError("line " + std::to_string(line_no) + ": " + what);
}

double parse_double(std::string_view field, std::size_t line_no) {
  field = trim(field);
  double v = 0.0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    fail(line_no, "cannot parse '" + std::string(field) + "' as a number");
  }
  if (!std::isfinite(v)) fail(line_no, "non-finite value '" + std::string(field) + "'");
  return v;
}

std::int64_t parse_id(std::string_view field, std::size_t line_no) {
  field = trim(field);
  std::int64_t v = 0;
  const auto [ptr, ec] = std::from_chars(field.data(), field.data() + field.size(), v);
  if (ec != std::errc() || ptr != field.data() + field.size() || field.empty()) {
    fail(line_no, "cannot parse event id '" + std::string(field) + "'");
  }
  return v;
}

// Returns false at end of input. Blank lines are skipped.
bool next_line(std::istream& is, std::string& line, std::size_t& line_no) {
  while (std::getline(is, line)) {
    ++line_no;
    if (!trim(line).empty()) return true;
  }
  return false;
}

std::vector<std::string> read_header(std::istream& is, std::string& line,
                                     std::size_t& line_no, const char* what) {
  if (!next_line(is, line, line_no)) {
    throw InputError(std::string(what) + ": missing header");
  }
  std::vector<std::string> fields;
  for (auto f : split(line)) fields.emplace_back(trim(f));
  if (fields.empty() || fields.front() != "event_id") {
    fail(line_no, std::string(what) + ": header must start with event_id");
  }
  return fields;
}

}  // namespace

std::string format_double(double v) {
  char buf[32];
  const auto [ptr, ec] = std::to_chars(buf, buf + sizeof buf, v);
  return std::string(buf, ptr);
}

void write_features_csv(std::ostream& os, const EventTable& events) {
  os << "event_id," << events.conditional_name;
  for (std::size_t j = 0; j < events.dim(); ++j) {
    os << ',' << (j < events.feature_names.size() ? events.feature_names[j] : "x" + std::to_string(j));
  }
  os << '\n';
  for (std::size_t i = 0; i < events.size(); ++i) {
    os << events.ids[i] << ',' << format_double(events.m[i]);
    for (double v : events.row(i)) os << ',' << format_double(v);
    os << '\n';
  }
}

EventTable read_features_csv(std::istream& is) {
  std::string line;
  std::size_t line_no = 0;
  const auto header = read_header(is, line, line_no, "features csv");
  if (header.size() < 3) fail(line_no, "features csv: need event_id, a conditional and features");
  EventTable ev;
  ev.conditional_name = header[1];
  for (std::size_t j = 2; j < header.size(); ++j) ev.feature_names.push_back(header[j]);
  const std::size_t d = header.size() - 2;

  std::vector<double> values;
  std::unordered_set<std::int64_t> seen;
  while (next_line(is, line, line_no)) {
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                        std::to_string(fields.size()));
    }
    const std::int64_t id = parse_id(fields[0], line_no);
    if (!seen.insert(id).second) fail(line_no, "duplicate event id " + std::to_string(id));
    ev.ids.push_back(id);
    ev.m.push_back(parse_double(fields[1], line_no));
    for (std::size_t j = 0; j < d; ++j) values.push_back(parse_double(fields[j + 2], line_no));
  }
  ev.x = Eigen::Map<const RowMatrix>(values.data(), static_cast<Eigen::Index>(ev.ids.size()),
                                     static_cast<Eigen::Index>(d));
  return ev;
}

void write_labels_csv(std::ostream& os, std::span<const std::int64_t> ids,
                      std::span<const std::uint8_t> is_signal) {
  os << "event_id,is_signal\n";
  for (std::size_t i = 0; i < ids.size(); ++i) os << ids[i] << ',' << int{is_signal[i]} << '\n';
}

std::vector<std::uint8_t> read_labels_csv(std::istream& is, std::span<const std::int64_t> ids) {
  std::string line;
  std::size_t line_no = 0;
  const auto header = read_header(is, line, line_no, "labels csv");
  if (header.size() != 2 || header[1] != "is_signal") {
    fail(line_no, "labels csv: header must be event_id,is_signal");
  }
  std::vector<std::uint8_t> out;
  out.reserve(ids.size());
  while (next_line(is, line, line_no)) {
    const auto fields = split(line);
    if (fields.size() != 2) fail(line_no, "expected 2 fields");
    const std::int64_t id = parse_id(fields[0], line_no);
    if (out.size() >= ids.size() || ids[out.size()] != id) {
      fail(line_no, "label row for event " + std::to_string(id) + " does not match the events");
    }
    const auto flag = trim(fields[1]);
    if (flag != "0" && flag != "1") fail(line_no, "is_signal must be 0 or 1");
    out.push_back(flag == "1" ? 1 : 0);
  }
  if (out.size() != ids.size()) throw InputError("labels csv: row count does not match events");
  return out;
}

std::size_t read_particles_csv(
    std::istream& is,
    const std::function<void(std::int64_t, std::span<const Particle>)>& on_event) {
  std::string line;
  std::size_t line_no = 0;
  const auto header = read_header(is, line, line_no, "particles csv");
  const bool with_mass = header.size() == 5;
  if (header.size() < 4 || header.size() > 5 || header[1] != "pt" || header[2] != "eta" ||
      header[3] != "phi" || (with_mass && header[4] != "mass")) {
    fail(line_no, "particles csv: header must be event_id,pt,eta,phi[,mass]");
  }

  std::unordered_set<std::int64_t> done;
  std::vector<Particle> current;
  std::int64_t current_id = 0;
  bool open = false;
  std::size_t rows = 0;
  auto flush = [&]() {
    if (!open) return;
    on_event(current_id, current);
    done.insert(current_id);
    current.clear();
    open = false;
  };

  while (next_line(is, line, line_no)) {
    const auto fields = split(line);
    if (fields.size() != header.size()) {
      fail(line_no, "expected " + std::to_string(header.size()) + " fields, found " +
                        std::to_string(fields.size()));
    }
    const std::int64_t id = parse_id(fields[0], line_no);
    if (!open || id != current_id) {
      flush();
      if (done.count(id)) fail(line_no, "rows of event " + std::to_string(id) + " are not contiguous");
      current_id = id;
      open = true;
    }
    Particle p;
    p.pt = parse_double(fields[1], line_no);
    p.eta = parse_double(fields[2], line_no);
    p.phi = parse_double(fields[3], line_no);
    if (with_mass) p.mass = parse_double(fields[4], line_no);
    if (p.pt < 0.0) fail(line_no, "negative pt");
    if (p.mass < 0.0) fail(line_no, "negative mass");
    current.push_back(p);
    ++rows;
  }
  flush();
  return rows;
}

void write_particles_csv(std::ostream& os, std::int64_t event_id,
                         std::span<const Particle> particles) {
  for (const Particle& p : particles) {
    os << event_id << ',' << format_double(p.pt) << ',' << format_double(p.eta) << ','
       << format_double(p.phi) << ',' << format_double(p.mass) << '\n';
  }
}

void write_scores_csv(std::ostream& os, const EventTable& events, const AnomalyReport& report) {
  os << "event_id,m,alpha,p_signal,p_background,clamped_flag\n";
  for (std::size_t i = 0; i < events.size(); ++i) {
    os << events.ids[i] << ',' << format_double(events.m[i]) << ','
       << format_double(report.alphas[i]) << ',' << format_double(report.p_signal[i]) << ','
       << format_double(report.p_background[i]) << ',' << int{report.clamped[i]} << '\n';
  }
}

void write_scan_csv(std::ostream& os, const std::vector<ScanBin>& scan) {
  os << "m_lo,m_hi,count,alpha_max,alpha_p99\n";
  for (const ScanBin& b : scan) {
    os << format_double(b.m_lo) << ',' << format_double(b.m_hi) << ',' << b.count << ',';
    if (b.alpha_max) os << format_double(*b.alpha_max);
    os << ',';
    if (b.alpha_p99) os << format_double(*b.alpha_p99);
    os << '\n';
  }
}

}  // namespace gisad
