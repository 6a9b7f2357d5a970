#include <cerrno>
#include <cstdio>
#include <cstdlib>
#include <fstream>
#include <istream>
#include <ostream>
#include <string>

#include "gisad/errors.hpp"
#include "gisad/gis_flow.hpp"

namespace gisad {

namespace {

constexpr const char* kHeader = "GISFLOW v1";

std::string fmt17(double v) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

void write_values(std::ostream& out, const char* tag, const std::vector<double>& values) {
  out << tag;
  for (double v : values) out << ' ' << fmt17(v);
  out << '\n';
}

class TokenReader {
 public:
  explicit TokenReader(std::istream& in) : in_(in) {}

  std::string word() {
    std::string tok;
    if (!(in_ >> tok)) throw InputError("model file: unexpected end of input");
    return tok;
  }

  void expect(const std::string& tag) {
    const std::string tok = word();
    if (tok != tag) throw InputError("model file: expected '" + tag + "', found '" + tok + "'");
  }

  double real() {
    const std::string tok = word();
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || errno == ERANGE) {
      throw InputError("model file: bad number '" + tok + "'");
    }
    return v;
  }

  std::size_t count() {
    const std::string tok = word();
    char* end = nullptr;
    const unsigned long long v = std::strtoull(tok.c_str(), &end, 10);
    if (end != tok.c_str() + tok.size() || tok.empty() || tok[0] == '-') {
      throw InputError("model file: bad count '" + tok + "'");
    }
    return static_cast<std::size_t>(v);
  }

  std::vector<double> reals(std::size_t n) {
    std::vector<double> v(n);
    for (auto& x : v) x = real();
    return v;
  }

 private:
  std::istream& in_;
};

}  // namespace

void save_model(const FlowModel& model, std::ostream& out) {
  const std::size_t d = model.dim();
  out << kHeader << '\n';
  out << "dim " << d << '\n';
  write_values(out, "shift", model.standardization().shift);
  write_values(out, "scale", model.standardization().scale);
  out << "edges " << model.binning().edges().size();
  for (double e : model.binning().edges()) out << ' ' << fmt17(e);
  out << '\n';
  out << "layers " << model.layers().size() << '\n';
  for (std::size_t l = 0; l < model.layers().size(); ++l) {
    const GisLayer& layer = model.layers()[l];
    out << "layer " << l << ' ' << layer.n_slices() << '\n';
    out << 'W';
    for (Eigen::Index r = 0; r < layer.directions.rows(); ++r) {
      for (Eigen::Index c = 0; c < layer.directions.cols(); ++c) {
        out << ' ' << fmt17(layer.directions(r, c));
      }
    }
    out << '\n';
    for (std::size_t k = 0; k < layer.transforms.size(); ++k) {
      for (std::size_t b = 0; b < layer.transforms[k].size(); ++b) {
        const Marginal1DTransform& t = layer.transforms[k][b];
        out << "transform " << k << ' ' << b << ' ' << t.knots_in().size() << ' '
            << fmt17(t.derivative_floor()) << ' ' << fmt17(t.tail_slopes().first) << ' '
            << fmt17(t.tail_slopes().second) << '\n';
        write_values(out, "in", t.knots_in());
        write_values(out, "out", t.knots_out());
      }
    }
  }
  out << "end\n";
}

FlowModel load_model(std::istream& in) {
  std::string header;
  if (!std::getline(in, header) || header != kHeader) {
    throw InputError("model file: missing '" + std::string(kHeader) + "' header");
  }
  TokenReader r(in);
  r.expect("dim");
  const std::size_t d = r.count();
  if (d == 0) throw InputError("model file: zero dimension");
  Standardization st;
  r.expect("shift");
  st.shift = r.reals(d);
  r.expect("scale");
  st.scale = r.reals(d);
  r.expect("edges");
  ConditionalBinning binning(r.reals(r.count()));
  r.expect("layers");
  const std::size_t n_layers = r.count();
  std::vector<GisLayer> layers(n_layers);
  for (std::size_t l = 0; l < n_layers; ++l) {
    r.expect("layer");
    if (r.count() != l) throw InputError("model file: layers out of order");
    const std::size_t k_slices = r.count();
    if (k_slices == 0 || k_slices > d) throw InputError("model file: bad slice count");
    GisLayer& layer = layers[l];
    r.expect("W");
    layer.directions.resize(static_cast<Eigen::Index>(d), static_cast<Eigen::Index>(k_slices));
    for (Eigen::Index row = 0; row < layer.directions.rows(); ++row) {
      for (Eigen::Index c = 0; c < layer.directions.cols(); ++c) layer.directions(row, c) = r.real();
    }
    layer.transforms.assign(k_slices, {});
    for (std::size_t k = 0; k < k_slices; ++k) {
      for (std::size_t b = 0; b < binning.n_bins(); ++b) {
        r.expect("transform");
        if (r.count() != k || r.count() != b) throw InputError("model file: transforms out of order");
        const std::size_t n_knots = r.count();
        const double floor = r.real();
        const double lo = r.real();
        const double hi = r.real();
        r.expect("in");
        std::vector<double> knots_in = r.reals(n_knots);
        r.expect("out");
        std::vector<double> knots_out = r.reals(n_knots);
        layer.transforms[k].emplace_back(std::move(knots_in), std::move(knots_out),
                                         std::pair{lo, hi}, floor);
      }
    }
  }
  r.expect("end");
  return FlowModel(std::move(st), std::move(binning), std::move(layers));
}

void save_model_file(const FlowModel& model, const std::string& path) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("cannot open model file for writing: " + path);
  save_model(model, out);
  if (!out) throw InputError("failed writing model file: " + path);
}

FlowModel load_model_file(const std::string& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw InputError("cannot open model file: " + path);
  return load_model(in);
}

}  // namespace gisad
