#pragma once

#include <algorithm>
#include <cctype>
#include <cmath>
#include <cstdio>
#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <map>
#include <optional>
#include <ostream>
#include <sstream>
#include <string>
#include <vector>

#include "darboux/analysis.hpp"
#include "darboux/error.hpp"
#include "darboux/surface.hpp"
#include "darboux/tracer.hpp"

namespace darboux {

// Run description file (INI) could not be understood.
struct ConfigError : Error {
  using Error::Error;
};

// One [trace.N] section: where to start, what to trace, how far.
struct TraceSpec {
  int index = 0;
  TraceConfig cfg;
  StartPoint start;
  bool both_branches = false;
};

struct VerifyToggles {
  bool axis = false;
  bool tangent_normal_curve = false;
  bool rectifying_curve = false;
  bool equivalence = false;
  bool helix_mate = false;
  bool isophote_mate = false;
  bool classify = false;

  bool any() const {
    return axis || tangent_normal_curve || rectifying_curve || equivalence || helix_mate ||
           isophote_mate || classify;
  }
};

struct RunConfig {
  std::optional<Surface> surface;
  std::vector<TraceSpec> traces;
  VerifyToggles verify;
  std::string out_dir = "out";
  std::string format = "csv";
};

// Command-line overrides applied on top of the file.
struct RunOverrides {
  std::optional<std::string> out_dir;
  std::optional<double> step;
  std::optional<double> s_max;
  std::optional<std::string> branch;  // plus | minus | both
  std::optional<std::string> format;  // csv | tsv
  std::optional<double> surface_residual;  // curve re-analysis only
};

namespace detail {

inline std::string trimmed(const std::string& s) {
  std::size_t a = 0, b = s.size();
  while (a < b && std::isspace(static_cast<unsigned char>(s[a]))) ++a;
  while (b > a && std::isspace(static_cast<unsigned char>(s[b - 1]))) --b;
  return s.substr(a, b - a);
}

inline std::string lowered(std::string s) {
  for (char& c : s) c = static_cast<char>(std::tolower(static_cast<unsigned char>(c)));
  return s;
}

struct IniEntry {
  std::string value;
  int line = 0;
  mutable bool used = false;
};

using IniSection = std::map<std::string, IniEntry>;
using IniFile = std::map<std::string, IniSection>;

inline IniFile parse_ini(std::istream& in, const std::string& name) {
  IniFile out;
  std::string line, section;
  int lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    const std::string t = trimmed(line);
    if (t.empty() || t[0] == '#' || t[0] == ';') continue;
    if (t.front() == '[') {
      if (t.back() != ']')
        throw ConfigError(name + ":" + std::to_string(lineno) + ": unterminated section header");
      section = trimmed(t.substr(1, t.size() - 2));
      if (section.empty())
        throw ConfigError(name + ":" + std::to_string(lineno) + ": empty section name");
      out[section];  // a section may be empty but must still be known
      continue;
    }
    const std::size_t eq = t.find('=');
    if (eq == std::string::npos)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": expected key = value");
    const std::string key = trimmed(t.substr(0, eq));
    if (key.empty())
      throw ConfigError(name + ":" + std::to_string(lineno) + ": empty key");
    if (section.empty())
      throw ConfigError(name + ":" + std::to_string(lineno) + ": key outside any section");
    if (!out[section].emplace(key, IniEntry{trimmed(t.substr(eq + 1)), lineno, false}).second)
      throw ConfigError(name + ":" + std::to_string(lineno) + ": duplicate key '" + key + "'");
  }
  return out;
}

// Numbers in the run file are constant expressions, so "pi/4" works.
inline double number_value(const std::string& text, const std::string& where) {
  try {
    return Expression::parse(text, {}).value({});
  } catch (const Error& err) {
    throw ConfigError(where + ": " + err.what());
  }
}

inline std::vector<double> number_list(const std::string& text, const std::string& where) {
  std::vector<double> out;
  std::size_t pos = 0;
  while (pos <= text.size()) {
    const std::size_t comma = text.find(',', pos);
    const std::string part =
        trimmed(comma == std::string::npos ? text.substr(pos) : text.substr(pos, comma - pos));
    if (part.empty()) throw ConfigError(where + ": empty entry in number list");
    out.push_back(number_value(part, where));
    if (comma == std::string::npos) break;
    pos = comma + 1;
  }
  return out;
}

inline bool bool_value(const std::string& text, const std::string& where) {
  const std::string v = lowered(text);
  if (v == "on" || v == "true" || v == "1" || v == "yes") return true;
  if (v == "off" || v == "false" || v == "0" || v == "no") return false;
  throw ConfigError(where + ": expected on/off, got '" + text + "'");
}

class SectionReader {
 public:
  SectionReader(const IniSection& s, std::string name) : s_(s), name_(std::move(name)) {}

  const std::string* find(const std::string& key) const {
    const auto it = s_.find(key);
    if (it == s_.end()) return nullptr;
    it->second.used = true;
    return &it->second.value;
  }

  std::string require(const std::string& key) const {
    const std::string* v = find(key);
    if (!v) throw ConfigError("[" + name_ + "] is missing the '" + key + "' key");
    return *v;
  }

  double number(const std::string& key, double fallback) const {
    const std::string* v = find(key);
    return v ? number_value(*v, where(key)) : fallback;
  }

  std::string where(const std::string& key) const { return "[" + name_ + "] " + key; }

  void reject_unknown() const {
    for (const auto& [key, entry] : s_)
      if (!entry.used)
        throw ConfigError("[" + name_ + "] has an unknown key '" + key + "' (line " +
                          std::to_string(entry.line) + ")");
  }

 private:
  const IniSection& s_;
  std::string name_;
};

inline Surface load_surface(const IniSection& sec) {
  SectionReader r(sec, "surface");
  const std::string kind = lowered(r.require("kind"));
  std::optional<Surface> out;
  if (kind == "preset") {
    try {
      out = make_preset(r.require("preset"));
    } catch (const GeometryError& err) {
      throw ConfigError(std::string("[surface] ") + err.what());
    }
  } else if (kind == "parametric") {
    const std::vector<std::string> uv = {"u", "v"};
    auto component = [&](const char* key) {
      try {
        return Expression::parse(r.require(key), uv);
      } catch (const ParseError& err) {
        throw ConfigError(r.where(key) + ": " + err.what());
      }
    };
    Expression x = component("x"), y = component("y"), z = component("z");
    out = ParametricSurface(std::move(x), std::move(y), std::move(z));
  } else if (kind == "implicit") {
    const std::vector<std::string> xyz = {"x", "y", "z"};
    try {
      out = ImplicitSurface(Expression::parse(r.require("f"), xyz));
    } catch (const ParseError& err) {
      throw ConfigError(r.where("f") + ": " + err.what());
    }
  } else {
    throw ConfigError("[surface] kind must be preset, parametric or implicit");
  }
  if (auto* ps = std::get_if<ParametricSurface>(&*out)) {
    Domain2 dom = ps->domain();
    dom.u_min = r.number("u_min", dom.u_min);
    dom.u_max = r.number("u_max", dom.u_max);
    dom.v_min = r.number("v_min", dom.v_min);
    dom.v_max = r.number("v_max", dom.v_max);
    ps->set_domain(dom);
    for (const char* key : {"x_min", "x_max", "y_min", "y_max", "z_min", "z_max", "f"})
      if (sec.count(key) && !sec.at(key).used)
        throw ConfigError(std::string("[surface] key '") + key +
                          "' does not apply to a parametric surface");
  } else {
    auto* is = std::get_if<ImplicitSurface>(&*out);
    Box3 box = is->box();
    box.x_min = r.number("x_min", box.x_min);
    box.x_max = r.number("x_max", box.x_max);
    box.y_min = r.number("y_min", box.y_min);
    box.y_max = r.number("y_max", box.y_max);
    box.z_min = r.number("z_min", box.z_min);
    box.z_max = r.number("z_max", box.z_max);
    is->set_box(box);
    for (const char* key : {"u_min", "u_max", "v_min", "v_max", "x", "y", "z"})
      if (sec.count(key) && !sec.at(key).used)
        throw ConfigError(std::string("[surface] key '") + key +
                          "' does not apply to an implicit surface");
  }
  r.reject_unknown();
  return std::move(*out);
}

inline TraceSpec load_trace(const IniSection& sec, const std::string& name, int index,
                            bool parametric) {
  SectionReader r(sec, name);
  TraceSpec spec;
  spec.index = index;

  const std::string family = lowered(r.require("family"));
  if (family == "slant")
    spec.cfg.family = Family::Slant;
  else if (family == "helix")
    spec.cfg.family = Family::Helix;
  else if (family == "isophote")
    spec.cfg.family = Family::Isophote;
  else
    throw ConfigError(r.where("family") + ": must be slant, helix or isophote");

  const std::vector<double> axis = number_list(r.require("axis"), r.where("axis"));
  if (axis.size() != 3) throw ConfigError(r.where("axis") + ": needs three components");
  spec.cfg.axis = {axis[0], axis[1], axis[2]};
  if (!(norm(spec.cfg.axis) > 0)) throw ConfigError(r.where("axis") + ": must be nonzero");

  spec.cfg.theta = number_value(r.require("theta"), r.where("theta"));
  if (!(spec.cfg.theta > 0) || !(spec.cfg.theta < kPi))
    throw ConfigError(r.where("theta") + ": must lie strictly between 0 and pi");

  if (const std::string* b = r.find("branch")) {
    const std::string v = lowered(*b);
    if (v == "plus")
      spec.cfg.branch = Branch::Plus;
    else if (v == "minus")
      spec.cfg.branch = Branch::Minus;
    else if (v == "both")
      spec.both_branches = true;
    else
      throw ConfigError(r.where("branch") + ": must be plus, minus or both");
  }

  const std::vector<double> start = number_list(r.require("start"), r.where("start"));
  if (parametric) {
    if (start.size() != 2)
      throw ConfigError(r.where("start") + ": a parametric surface needs (u, v)");
    spec.start = Vec2{start[0], start[1]};
  } else {
    if (start.size() != 3)
      throw ConfigError(r.where("start") + ": an implicit surface needs (x, y, z)");
    spec.start = Vec3{start[0], start[1], start[2]};
  }

  spec.cfg.step = r.number("step", spec.cfg.step);
  if (!(spec.cfg.step > 0)) throw ConfigError(r.where("step") + ": must be positive");
  spec.cfg.s_max = r.number("s_max", spec.cfg.s_max);
  if (!(spec.cfg.s_max >= 0)) throw ConfigError(r.where("s_max") + ": must be non-negative");

  spec.cfg.tol.surface_residual = r.number("surface_residual", spec.cfg.tol.surface_residual);
  spec.cfg.tol.constraint_residual =
      r.number("constraint_residual", spec.cfg.tol.constraint_residual);
  spec.cfg.tol.discriminant_floor =
      r.number("discriminant_floor", spec.cfg.tol.discriminant_floor);
  spec.cfg.tol.eps_reg = r.number("eps_reg", spec.cfg.tol.eps_reg);
  spec.cfg.tol.eps_deg = r.number("eps_deg", spec.cfg.tol.eps_deg);

  r.reject_unknown();
  return spec;
}

inline VerifyToggles load_verify(const IniSection& sec) {
  SectionReader r(sec, "verify");
  VerifyToggles v;
  auto flag = [&](const char* key, bool& slot) {
    if (const std::string* t = r.find(key)) slot = bool_value(*t, r.where(key));
  };
  flag("axis", v.axis);
  flag("tangent_normal_curve", v.tangent_normal_curve);
  flag("rectifying_curve", v.rectifying_curve);
  flag("equivalence", v.equivalence);
  flag("helix_mate", v.helix_mate);
  flag("isophote_mate", v.isophote_mate);
  flag("classify", v.classify);
  r.reject_unknown();
  return v;
}

}  // namespace detail

// Parse a run file. With require_traces = false a surface-only file is
// accepted (used when re-analyzing an existing curve table, where any
// [trace.N] sections present are simply unused).
inline RunConfig load_config(const std::string& path, bool require_traces = true) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open run file '" + path + "'");
  const detail::IniFile ini = detail::parse_ini(in, path);

  RunConfig rc;
  const auto surf = ini.find("surface");
  if (surf == ini.end()) throw ConfigError(path + ": missing [surface] section");
  rc.surface = detail::load_surface(surf->second);
  const bool parametric = std::holds_alternative<ParametricSurface>(*rc.surface);

  for (const auto& [name, sec] : ini) {
    if (name == "surface") continue;
    if (name == "verify") {
      rc.verify = detail::load_verify(sec);
      continue;
    }
    if (name == "output") {
      detail::SectionReader r(sec, "output");
      if (const std::string* d = r.find("dir")) rc.out_dir = *d;
      if (const std::string* f = r.find("format")) {
        const std::string v = detail::lowered(*f);
        if (v != "csv" && v != "tsv")
          throw ConfigError("[output] format must be csv or tsv");
        rc.format = v;
      }
      r.reject_unknown();
      continue;
    }
    if (name.rfind("trace.", 0) == 0) {
      const std::string tail = name.substr(6);
      int index = 0;
      bool digits = !tail.empty();
      for (char ch : tail) digits = digits && std::isdigit(static_cast<unsigned char>(ch));
      if (digits) index = std::atoi(tail.c_str());
      if (!digits || index <= 0)
        throw ConfigError(path + ": section [" + name + "] must be [trace.<positive integer>]");
      rc.traces.push_back(detail::load_trace(sec, name, index, parametric));
      continue;
    }
    throw ConfigError(path + ": unknown section [" + name + "]");
  }
  std::sort(rc.traces.begin(), rc.traces.end(),
            [](const TraceSpec& a, const TraceSpec& b) { return a.index < b.index; });
  for (std::size_t i = 1; i < rc.traces.size(); ++i)
    if (rc.traces[i].index == rc.traces[i - 1].index)
      throw ConfigError(path + ": duplicate trace index " + std::to_string(rc.traces[i].index));
  if (require_traces && rc.traces.empty())
    throw ConfigError(path + ": no [trace.N] sections");
  return rc;
}

// ---------------------------------------------------------------------------
// writers

namespace detail {

inline std::string num(double v) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

inline std::string vec(const Vec3& v) {
  return "[" + num(v.x) + ", " + num(v.y) + ", " + num(v.z) + "]";
}

// kg, kn, tg and the slant function for the CSV columns; NaN-filled when the
// trace is too short to differentiate.
struct CsvScalars {
  ScalarSeries q;
  std::vector<double> sigma;
};

inline CsvScalars csv_scalars(const TraceResult& tr) {
  CsvScalars out;
  const std::size_t n = tr.curve.size();
  if (n >= 5) {
    out.q = scalars_from_frames(tr.curve.s, tr.frames);
    out.sigma = slant_function(tr.curve.s, out.q);
  } else {
    out.q.kg.assign(n, kNaN);
    out.q.kn.assign(n, kNaN);
    out.q.tg.assign(n, kNaN);
    out.sigma.assign(n, kNaN);
  }
  return out;
}

}  // namespace detail

inline void write_trace_table(std::ostream& os, const TraceResult& tr, char sep = ',') {
  const bool with_uv = !tr.curve.uv.empty();
  const detail::CsvScalars sc = detail::csv_scalars(tr);
  os << "s" << sep << "x" << sep << "y" << sep << "z";
  if (with_uv) os << sep << "u" << sep << "v";
  os << sep << "Tx" << sep << "Ty" << sep << "Tz" << sep << "Vx" << sep << "Vy" << sep << "Vz"
     << sep << "Ux" << sep << "Uy" << sep << "Uz" << sep << "kg" << sep << "kn" << sep << "tg"
     << sep << "sigma" << "\n";
  for (std::size_t i = 0; i < tr.curve.size(); ++i) {
    using detail::num;
    os << num(tr.curve.s[i]) << sep << num(tr.curve.p[i].x) << sep << num(tr.curve.p[i].y) << sep
       << num(tr.curve.p[i].z);
    if (with_uv) os << sep << num(tr.curve.uv[i].u) << sep << num(tr.curve.uv[i].v);
    const Vec3 &T = tr.frames.T[i], &V = tr.frames.V[i], &U = tr.frames.U[i];
    os << sep << num(T.x) << sep << num(T.y) << sep << num(T.z) << sep << num(V.x) << sep
       << num(V.y) << sep << num(V.z) << sep << num(U.x) << sep << num(U.y) << sep << num(U.z)
       << sep << num(sc.q.kg[i]) << sep << num(sc.q.kn[i]) << sep << num(sc.q.tg[i]) << sep
       << num(sc.sigma[i]) << "\n";
  }
}

inline void write_trace_diagnostics(std::ostream& os, const std::string& prefix,
                                    const TraceResult& tr) {
  using detail::num;
  double angle = 0, speed = 0, surf = 0;
  for (double x : tr.angle_err) angle = std::max(angle, std::abs(x));
  for (double x : tr.speed_err) speed = std::max(speed, std::abs(x));
  for (double x : tr.surface_err) surf = std::max(surf, std::abs(x));
  double sigma_spread = kNaN;
  if (tr.curve.size() >= 5) {
    const SeriesStats st = interior_stats(detail::csv_scalars(tr).sigma);
    if (st.n > 0) sigma_spread = st.spread();
  }
  os << prefix << ".termination = " << to_string(tr.termination) << "\n";
  os << prefix << ".samples = " << tr.curve.size() << "\n";
  os << prefix << ".s_reached = " << num(tr.s_reached) << "\n";
  os << prefix << ".angle_drift_max = " << num(angle) << "\n";
  os << prefix << ".speed_err_max = " << num(speed) << "\n";
  os << prefix << ".surface_err_max = " << num(surf) << "\n";
  os << prefix << ".sigma_spread = " << num(sigma_spread) << "\n";
}

// `input_axis` is the configured axis when the curve came from a trace run;
// pass nullopt for an ingested curve, where the mate checks fall back to the
// recovered axis and the input-alignment line is omitted.
inline void write_analysis_report(std::ostream& os, const std::string& prefix,
                                  const TraceResult& tr, const std::optional<Vec3>& input_axis,
                                  const VerifyToggles& v, const AnalysisTolerances& tol = {}) {
  using detail::num;
  using detail::vec;
  if (tr.curve.size() < 2 * kEndTrim + 8) {
    os << prefix << ".error = trace too short to analyze\n";
    return;
  }
  ScalarSeries q;
  try {
    q = scalars_from_frames(tr.curve.s, tr.frames);
  } catch (const Error& err) {
    os << prefix << ".error = " << err.what() << "\n";
    return;
  }
  std::optional<Vec3> mate_axis;
  if (input_axis) mate_axis = normalized(*input_axis);
  if (!mate_axis && (v.helix_mate || v.isophote_mate)) {
    try {
      mate_axis = recover_axis(tr.curve.s, tr.frames, q, tol.eps_deg).axis;
    } catch (const Error&) {
    }
  }
  if (v.axis) {
    try {
      const AxisEstimate ax = recover_axis(tr.curve.s, tr.frames, q, tol.eps_deg);
      os << prefix << ".axis.estimate = " << vec(ax.axis) << "\n";
      os << prefix << ".axis.theta = " << num(ax.theta) << "\n";
      os << prefix << ".axis.sigma = " << num(ax.sigma) << "\n";
      os << prefix << ".axis.spread = " << num(ax.axis_spread) << "\n";
      os << prefix << ".axis.angle_residual = " << num(ax.angle_residual) << "\n";
      if (input_axis)
        os << prefix << ".axis.alignment_with_input = "
           << num(std::abs(dot(ax.axis, normalized(*input_axis)))) << "\n";
    } catch (const Error& err) {
      os << prefix << ".axis.error = " << err.what() << "\n";
    }
  }
  if (v.tangent_normal_curve) {
    try {
      const TangentNormalCurveCheck tn = check_tangent_normal_curve(tr.curve.s, tr.frames, q, tol);
      os << prefix << ".tangent_normal_curve.kappa_residual = " << num(tn.kappa_residual) << "\n";
      os << prefix << ".tangent_normal_curve.ratio_residual = " << num(tn.ratio_residual) << "\n";
      os << prefix << ".tangent_normal_curve.ratio_variation = " << num(tn.ratio_variation)
         << "\n";
      os << prefix << ".tangent_normal_curve.helix = " << (tn.helix ? "true" : "false") << "\n";
    } catch (const Error& err) {
      os << prefix << ".tangent_normal_curve.error = " << err.what() << "\n";
    }
  }
  if (v.rectifying_curve) {
    try {
      const AxisEstimate ax = recover_axis(tr.curve.s, tr.frames, q, tol.eps_deg);
      const RectifyingCurveCheck rcc =
          check_rectifying_curve(tr.curve.s, tr.frames, q, ax.sigma, tol);
      os << prefix << ".rectifying_curve.kappa_mean = " << num(rcc.kappa_mean) << "\n";
      os << prefix << ".rectifying_curve.tau_mean = " << num(rcc.tau_mean) << "\n";
      os << prefix << ".rectifying_curve.kappa_residual = " << num(rcc.kappa_residual) << "\n";
      os << prefix << ".rectifying_curve.tau_residual = " << num(rcc.tau_residual) << "\n";
    } catch (const Error& err) {
      os << prefix << ".rectifying_curve.error = " << err.what() << "\n";
    }
  }
  if (v.equivalence) {
    try {
      const SlantEquivalence eq = check_slant_equivalence(tr.curve.s, tr.frames, q, tol);
      auto line = [&](const char* name, const ConditionReport& c) {
        os << prefix << ".equivalence." << name << " = " << (c.pass ? "true" : "false") << "\n";
        os << prefix << ".equivalence." << name << "_residual = " << num(c.residual) << "\n";
      };
      line("slant_constant", eq.slant_constant);
      line("fixed_axis_angle", eq.fixed_axis_angle);
      line("image_circle", eq.image_circle);
      line("image_turning", eq.image_turning);
      line("integral_helix", eq.integral_helix);
      line("angle_form_match", eq.angle_form_match);
      os << prefix << ".equivalence.all = " << (eq.all() ? "true" : "false") << "\n";
    } catch (const Error& err) {
      os << prefix << ".equivalence.error = " << err.what() << "\n";
    }
  }
  if (v.helix_mate) {
    if (mate_axis) {
      const FieldAngleCheck m =
          check_helix_mate(tr.curve.s, tr.frames, q, *mate_axis, tol.eps_deg);
      os << prefix << ".helix_mate.base_value = " << num(m.base_value) << "\n";
      os << prefix << ".helix_mate.base_drift = " << num(m.base_drift) << "\n";
      os << prefix << ".helix_mate.mate_value = " << num(m.mate_value) << "\n";
      os << prefix << ".helix_mate.mate_drift = " << num(m.mate_drift) << "\n";
    } else {
      os << prefix << ".helix_mate.error = no axis: none configured, none recoverable\n";
    }
  }
  if (v.isophote_mate) {
    if (mate_axis) {
      const FieldAngleCheck m =
          check_isophote_mate(tr.curve.s, tr.frames, q, *mate_axis, tol.eps_deg);
      os << prefix << ".isophote_mate.base_value = " << num(m.base_value) << "\n";
      os << prefix << ".isophote_mate.base_drift = " << num(m.base_drift) << "\n";
      os << prefix << ".isophote_mate.mate_value = " << num(m.mate_value) << "\n";
      os << prefix << ".isophote_mate.mate_drift = " << num(m.mate_drift) << "\n";
    } else {
      os << prefix << ".isophote_mate.error = no axis: none configured, none recoverable\n";
    }
  }
  if (v.classify) {
    const CurveClassification c = classify(tr.curve.s, tr.frames, q, tol);
    auto line = [&](const char* name, const ClassFlag& fl) {
      os << prefix << ".classify." << name << " = "
         << (!fl.defined ? "undefined" : fl.holds ? "true" : "false") << "\n";
      if (fl.defined) {
        os << prefix << ".classify." << name << "_value = " << num(fl.value) << "\n";
        os << prefix << ".classify." << name << "_residual = " << num(fl.residual) << "\n";
      }
    };
    line("geodesic", c.geodesic);
    line("asymptotic", c.asymptotic);
    line("principal", c.principal);
    line("helix", c.helix);
    line("slant", c.slant);
    line("isophote", c.isophote);
  }
}

// ---------------------------------------------------------------------------
// commands

inline int cmd_catalog(std::ostream& os) {
  std::size_t w = 0;
  for (const PresetInfo& p : preset_catalog()) w = std::max(w, p.name.size());
  for (const PresetInfo& p : preset_catalog()) {
    os << p.name << std::string(w + 2 - p.name.size(), ' ')
       << (p.kind == "parametric" ? "parametric  " : "implicit    ") << p.summary << "\n";
  }
  return 0;
}

namespace detail {

inline void apply_overrides(RunConfig& rc, const RunOverrides& ov) {
  if (ov.out_dir) rc.out_dir = *ov.out_dir;
  if (ov.format) {
    const std::string v = lowered(*ov.format);
    if (v != "csv" && v != "tsv") throw ConfigError("--format must be csv or tsv");
    rc.format = v;
  }
  for (TraceSpec& spec : rc.traces) {
    if (ov.step) {
      if (!(*ov.step > 0)) throw ConfigError("--step must be positive");
      spec.cfg.step = *ov.step;
    }
    if (ov.s_max) {
      if (!(*ov.s_max >= 0)) throw ConfigError("--s-max must be non-negative");
      spec.cfg.s_max = *ov.s_max;
    }
    if (ov.branch) {
      const std::string v = lowered(*ov.branch);
      spec.both_branches = v == "both";
      if (v == "plus")
        spec.cfg.branch = Branch::Plus;
      else if (v == "minus")
        spec.cfg.branch = Branch::Minus;
      else if (v != "both")
        throw ConfigError("--branch must be plus, minus or both");
    }
  }
}

struct TraceRun {
  TraceSpec spec;
  Branch branch;
  TraceResult result;
};

inline std::vector<TraceRun> run_all(const RunConfig& rc) {
  std::vector<TraceRun> runs;
  for (const TraceSpec& spec : rc.traces) {
    std::vector<Branch> branches;
    if (spec.both_branches)
      branches = {Branch::Plus, Branch::Minus};
    else
      branches = {spec.cfg.branch};
    for (Branch b : branches) {
      TraceRun run{spec, b, {}};
      TraceConfig cfg = spec.cfg;
      cfg.branch = b;
      run.result = trace(*rc.surface, spec.start, cfg);
      runs.push_back(std::move(run));
    }
  }
  return runs;
}

inline std::ofstream open_out(const std::filesystem::path& p) {
  std::ofstream os(p);
  if (!os) throw Error("cannot write '" + p.string() + "'");
  return os;
}

}  // namespace detail

// Shared implementation of the `trace` and `analyze` commands. Returns a
// process exit code: 0 ok, 2 bad run file, 3 trace could not start, 4 run
// incomplete (a trace too short to be useful, or output not writable),
// 5 anything unexpected.
inline int run_command(bool analyze, const std::string& config_path, const RunOverrides& ov,
                       std::ostream& log, std::ostream& err) {
  RunConfig rc;
  try {
    rc = load_config(config_path);
    detail::apply_overrides(rc, ov);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  std::vector<detail::TraceRun> runs;
  try {
    runs = detail::run_all(rc);
  } catch (const TraceError& e) {
    err << "error: " << e.what() << "\n";
    return 3;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  try {
    const std::filesystem::path dir(rc.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec && !std::filesystem::is_directory(dir))
      throw Error("cannot create output directory '" + rc.out_dir + "': " + ec.message());
    const char sep = rc.format == "tsv" ? '\t' : ',';
    const char* ext = rc.format == "tsv" ? ".tsv" : ".csv";

    std::ofstream diag = detail::open_out(dir / "diagnostics.txt");
    for (const detail::TraceRun& run : runs) {
      const std::string stem =
          "trace-" + std::to_string(run.spec.index) + "-" + to_string(run.branch);
      std::ofstream table = detail::open_out(dir / (stem + ext));
      write_trace_table(table, run.result, sep);
      write_trace_diagnostics(diag, "trace." + std::to_string(run.spec.index) + "." +
                                        to_string(run.branch),
                              run.result);
      log << stem << ext << ": " << to_string(run.result.termination)
          << ", samples = " << run.result.curve.size() << "\n";
    }
    if (analyze) {
      std::ofstream rep = detail::open_out(dir / "analysis.txt");
      VerifyToggles v = rc.verify;
      if (!v.any()) {
        // analyze with no [verify] section runs everything
        v.axis = v.tangent_normal_curve = v.rectifying_curve = v.equivalence = v.helix_mate =
            v.isophote_mate = v.classify = true;
      }
      for (const detail::TraceRun& run : runs) {
        write_analysis_report(rep, "trace." + std::to_string(run.spec.index) + "." +
                                       to_string(run.branch),
                              run.result, run.spec.cfg.axis, v);
      }
      log << "analysis.txt written\n";
    }
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 5;
  }
  for (const detail::TraceRun& run : runs)
    if (run.result.curve.size() < 2) {
      err << "error: trace " << run.spec.index << " (" << to_string(run.branch)
          << ") produced fewer than 2 samples\n";
      return 4;
    }
  return 0;
}

// ---------------------------------------------------------------------------
// re-analysis of an existing curve table

// A curve table as read back from disk: the position track plus the
// parameter-plane track when u/v columns are present. Frame and scalar
// columns in the file are ignored; they are recomputed from the geometry.
struct CurveTable {
  CurveSamples curve;
  bool has_uv = false;
};

inline CurveTable read_curve_table(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("cannot open curve file '" + path + "'");
  std::string line;
  if (!std::getline(in, line)) throw ConfigError(path + ": empty file");
  const char sep = line.find('\t') != std::string::npos ? '\t' : ',';
  auto split = [&](const std::string& text) {
    std::vector<std::string> cells;
    std::size_t pos = 0;
    while (true) {
      const std::size_t c = text.find(sep, pos);
      cells.push_back(
          detail::trimmed(c == std::string::npos ? text.substr(pos) : text.substr(pos, c - pos)));
      if (c == std::string::npos) break;
      pos = c + 1;
    }
    return cells;
  };
  const std::vector<std::string> header = split(line);
  auto col = [&](const char* name) {
    for (std::size_t i = 0; i < header.size(); ++i)
      if (header[i] == name) return static_cast<int>(i);
    return -1;
  };
  const int cs = col("s"), cx = col("x"), cy = col("y"), cz = col("z");
  if (cs < 0 || cx < 0 || cy < 0 || cz < 0)
    throw ConfigError(path + ": header must name the s, x, y and z columns");
  const int cu = col("u"), cv = col("v");
  if ((cu < 0) != (cv < 0))
    throw ConfigError(path + ": u and v columns must appear together");

  CurveTable out;
  out.has_uv = cu >= 0;
  int lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (detail::trimmed(line).empty()) continue;
    const std::vector<std::string> cells = split(line);
    auto cell = [&](int idx) {
      if (idx >= static_cast<int>(cells.size()))
        throw ConfigError(path + ":" + std::to_string(lineno) + ": row has too few columns");
      const std::string& text = cells[idx];
      char* end = nullptr;
      const double v = text.empty() ? kNaN : std::strtod(text.c_str(), &end);
      if (text.empty() || end != text.c_str() + text.size() || !std::isfinite(v))
        throw ConfigError(path + ":" + std::to_string(lineno) + ": bad number '" + text + "'");
      return v;
    };
    out.curve.s.push_back(cell(cs));
    out.curve.p.push_back({cell(cx), cell(cy), cell(cz)});
    if (out.has_uv) out.curve.uv.push_back({cell(cu), cell(cv)});
  }
  if (out.curve.size() < 2) throw ConfigError(path + ": needs at least two samples");
  try {
    validate_grid(out.curve.s);
  } catch (const GeometryError& e) {
    throw ConfigError(path + ": " + e.what());
  }
  return out;
}

// Attach Darboux frames to an ingested curve. Throws ConfigError when the
// table lacks columns the surface needs, GeometryError when the curve sits
// off the surface beyond `tol` or the surface is irregular along it.
inline TraceResult curve_frames(const Surface& surf, const CurveTable& tab, double tol) {
  TraceResult tr;
  tr.curve = tab.curve;
  const std::size_t n = tab.curve.size();
  std::vector<Vec3> U(n);
  double worst = 0;
  if (const auto* ps = std::get_if<ParametricSurface>(&surf)) {
    if (!tab.has_uv)
      throw ConfigError(
          "curve table has no u/v columns; they are required on a parametric surface");
    for (std::size_t i = 0; i < n; ++i) {
      const auto q = ps->patch_unchecked(tab.curve.uv[i].u, tab.curve.uv[i].v);
      worst = std::max(worst, norm(q.p - tab.curve.p[i]));
      U[i] = ParametricSurface::normal(q);
    }
  } else {
    const auto& is = std::get<ImplicitSurface>(surf);
    for (std::size_t i = 0; i < n; ++i) {
      const auto q = is.sample(tab.curve.p[i]);
      worst = std::max(worst, std::abs(q.f));
      U[i] = ImplicitSurface::normal(q);
    }
  }
  if (worst > tol)
    throw GeometryError("curve lies off the surface: residual " + detail::num(worst) +
                        " exceeds " + detail::num(tol));
  tr.frames = frames_from_samples(tr.curve, U);
  // The outermost frames come from one-sided position differences; the checks
  // differentiate them several more times, which would drag that end noise
  // past their own trims. Dropping those samples puts an ingested curve on
  // the same footing as integrator-produced frames.
  if (tr.curve.size() > 2 * kEndTrim + 2) {
    auto chop = [](auto& v) {
      v.erase(v.end() - kEndTrim, v.end());
      v.erase(v.begin(), v.begin() + kEndTrim);
    };
    chop(tr.curve.s);
    chop(tr.curve.p);
    if (!tr.curve.uv.empty()) chop(tr.curve.uv);
    chop(tr.frames.T);
    chop(tr.frames.V);
    chop(tr.frames.U);
  }
  tr.s_reached = tr.curve.s.back();
  return tr;
}

// The `analyze <curve table> --surface <run file>` form: re-derive frames and
// scalars from an existing table and write a fresh report next to the other
// outputs. Exit codes: 0 ok, 2 bad run file or curve table, 4 output not
// writable, 5 curve incompatible with the surface (off it, or frames
// undefined along it).
inline int analyze_curve_command(const std::string& curve_path, const std::string& surface_path,
                                 const RunOverrides& ov, std::ostream& log, std::ostream& err) {
  RunConfig rc;
  CurveTable tab;
  try {
    rc = load_config(surface_path, /*require_traces=*/false);
    if (ov.out_dir) rc.out_dir = *ov.out_dir;
    tab = read_curve_table(curve_path);
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  }
  TraceResult tr;
  try {
    tr = curve_frames(*rc.surface, tab, ov.surface_residual.value_or(1e-6));
  } catch (const ConfigError& e) {
    err << "error: " << e.what() << "\n";
    return 2;
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 5;
  }
  try {
    const std::filesystem::path dir(rc.out_dir);
    std::error_code ec;
    std::filesystem::create_directories(dir, ec);
    if (ec && !std::filesystem::is_directory(dir))
      throw Error("cannot create output directory '" + rc.out_dir + "': " + ec.message());
    const std::string stem = std::filesystem::path(curve_path).stem().string();
    std::ofstream rep = detail::open_out(dir / (stem + "-analysis.txt"));
    VerifyToggles v = rc.verify;
    if (!v.any()) {
      v.axis = v.tangent_normal_curve = v.rectifying_curve = v.equivalence = v.helix_mate =
          v.isophote_mate = v.classify = true;
    }
    write_analysis_report(rep, "curve", tr, std::nullopt, v);
    log << stem << "-analysis.txt written, samples = " << tr.curve.size() << "\n";
  } catch (const Error& e) {
    err << "error: " << e.what() << "\n";
    return 4;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return 5;
  }
  return 0;
}

}  // namespace darboux
