#pragma once

// Problem deck: the XML document declaring one calibration task.
// Schema reference: docs/deck.md.

#include <algorithm>
#include <charconv>
#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <sstream>
#include <stdexcept>
#include <string>
#include <string_view>
#include <vector>

#include <boost/property_tree/detail/rapidxml.hpp>

#include "odefit/config.hpp"
#include "odefit/csv.hpp"
#include "odefit/expr.hpp"

namespace odefit {

class DeckParseError : public std::runtime_error {
 public:
  using std::runtime_error::runtime_error;
};

/// Malformed XML. Line and column are 1-based.
class XmlSyntaxError : public DeckParseError {
 public:
  XmlSyntaxError(const std::string& what, std::size_t line, std::size_t column)
      : DeckParseError("XML syntax error at line " + std::to_string(line) + ", column " + std::to_string(column) +
                       ": " + what),
        line_(line),
        column_(column) {}
  std::size_t line() const noexcept { return line_; }
  std::size_t column() const noexcept { return column_; }

 private:
  std::size_t line_;
  std::size_t column_;
};

enum class ParamScale { linear, log10, automatic };
enum class RateSource { column, finite_difference };

struct StateDecl {
  std::string name;
  std::string initial;               // expression text, may reference parameters/constants
  std::optional<std::string> observed;  // data column bound to this state, derived from the dataset block

  friend bool operator==(const StateDecl&, const StateDecl&) = default;
};

struct ParamDecl {
  std::string name;
  double lower = 0.0;
  double upper = 1.0;
  ParamScale scale = ParamScale::automatic;

  friend bool operator==(const ParamDecl&, const ParamDecl&) = default;
};

struct ConstantDecl {
  std::string name;
  double value = 0.0;
  friend bool operator==(const ConstantDecl&, const ConstantDecl&) = default;
};

struct InputDecl {
  std::string name;
  std::string expression;  // in t and constants
  friend bool operator==(const InputDecl&, const InputDecl&) = default;
};

struct RhsEntry {
  std::string state;
  std::string expression;
  friend bool operator==(const RhsEntry&, const RhsEntry&) = default;
};

struct ColumnBinding {
  std::string column;
  std::string signal;  // "x" or "rate(x)"
  friend bool operator==(const ColumnBinding&, const ColumnBinding&) = default;
};

struct DatasetSpec {
  std::string path;
  std::string time_column = "t";
  std::vector<ColumnBinding> columns;
  RateSource rate_source = RateSource::finite_difference;

  // Filled by load_dataset(); not part of the XML.
  std::optional<DataTable> table;
  std::string load_error;
};

/// A signal reference: a state value or its time derivative.
struct SignalRef {
  std::string state;
  bool rate = false;

  std::string to_string() const { return rate ? "rate(" + state + ")" : state; }
  friend bool operator==(const SignalRef&, const SignalRef&) = default;
};

inline std::optional<SignalRef> parse_signal(std::string_view text) {
  auto trimmed = detail::trim(text);
  if (trimmed.size() > 6 && trimmed.substr(0, 5) == "rate(" && trimmed.back() == ')') {
    auto inner = detail::trim(trimmed.substr(5, trimmed.size() - 6));
    if (inner.empty()) return std::nullopt;
    return SignalRef{std::string(inner), true};
  }
  if (trimmed.empty() || trimmed.find_first_of("() ,") != std::string_view::npos) return std::nullopt;
  return SignalRef{std::string(trimmed), false};
}

inline const std::vector<std::string>& all_output_kinds() {
  static const std::vector<std::string> kinds{"params", "loss_history", "trajectory", "report"};
  return kinds;
}

struct ProblemDeck {
  std::string name;
  bool mass_conserving = false;
  std::vector<StateDecl> states;
  std::vector<ParamDecl> parameters;
  std::vector<ConstantDecl> constants;
  std::vector<InputDecl> inputs;
  std::vector<RhsEntry> rhs;
  DatasetSpec dataset;
  std::vector<LossTerm> loss;
  SolverConfig solver;
  OptimizerConfig optimizer;
  std::vector<std::string> outputs = all_output_kinds();

  // Unknown top-level elements, preserved verbatim (re-serialized).
  std::vector<std::string> extra_elements;
  // Parse-time warnings (unknown elements, ignored attributes).
  std::vector<std::string> warnings;

  const RhsEntry* rhs_for(std::string_view state) const {
    for (const auto& r : rhs)
      if (r.state == state) return &r;
    return nullptr;
  }

  std::ptrdiff_t state_index(std::string_view n) const {
    for (std::size_t i = 0; i < states.size(); ++i)
      if (states[i].name == n) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  std::ptrdiff_t parameter_index(std::string_view n) const {
    for (std::size_t i = 0; i < parameters.size(); ++i)
      if (parameters[i].name == n) return static_cast<std::ptrdiff_t>(i);
    return -1;
  }

  /// Names that a right-hand side may reference (besides `t`).
  std::set<std::string> rhs_scope() const {
    std::set<std::string> s{"t"};
    for (const auto& x : states) s.insert(x.name);
    for (const auto& x : parameters) s.insert(x.name);
    for (const auto& x : constants) s.insert(x.name);
    for (const auto& x : inputs) {
      s.insert(x.name);
      s.insert(x.name + "_dot");
    }
    return s;
  }
};

/// Structural equality over the declarative content (ignores loaded data
/// and parse warnings).
inline bool operator==(const ProblemDeck& a, const ProblemDeck& b) {
  return a.name == b.name && a.mass_conserving == b.mass_conserving && a.states == b.states &&
         a.parameters == b.parameters && a.constants == b.constants && a.inputs == b.inputs && a.rhs == b.rhs &&
         a.dataset.path == b.dataset.path && a.dataset.time_column == b.dataset.time_column &&
         a.dataset.columns == b.dataset.columns && a.dataset.rate_source == b.dataset.rate_source &&
         a.loss == b.loss && a.solver == b.solver && a.optimizer == b.optimizer && a.outputs == b.outputs &&
         a.extra_elements == b.extra_elements;
}

inline std::string_view to_string(ParamScale s) {
  switch (s) {
    case ParamScale::linear: return "linear";
    case ParamScale::log10: return "log10";
    case ParamScale::automatic: return "auto";
  }
  return "auto";
}

/// Resolves `auto`: log10 when lower > 0 and upper/lower > 100.
inline ParamScale resolved_scale(const ParamDecl& p) {
  if (p.scale != ParamScale::automatic) return p.scale;
  return (p.lower > 0.0 && p.upper / p.lower > 100.0) ? ParamScale::log10 : ParamScale::linear;
}

inline std::string_view to_string(Method m) { return m == Method::dopri5 ? "dopri5" : "tr_bdf2"; }
inline std::string_view to_string(Transform t) { return t == Transform::identity ? "identity" : "log10"; }
inline std::string_view to_string(Reduction r) {
  return r == Reduction::mean_square ? "mean_square" : "root_mean_square";
}
inline std::string_view to_string(RateSource r) { return r == RateSource::column ? "column" : "finite_difference"; }

namespace detail {

namespace rx = boost::property_tree::detail::rapidxml;
using XmlNode = rx::xml_node<char>;

inline std::string xml_escape(std::string_view s) {
  std::string out;
  for (char c : s) {
    switch (c) {
      case '&': out += "&amp;"; break;
      case '<': out += "&lt;"; break;
      case '>': out += "&gt;"; break;
      case '"': out += "&quot;"; break;
      case '\'': out += "&apos;"; break;
      default: out += c;
    }
  }
  return out;
}

inline std::string node_text(const XmlNode* n) {
  std::string s;
  for (auto* c = n->first_node(); c; c = c->next_sibling())
    if (c->type() == rx::node_data || c->type() == rx::node_cdata) s.append(c->value(), c->value_size());
  return std::string(trim(s));
}

inline std::string node_path(const XmlNode* n) {
  std::string p;
  for (auto* x = n; x && x->name_size() > 0; x = x->parent()) p = "/" + std::string(x->name(), x->name_size()) + p;
  return p;
}

inline std::string reprint(const XmlNode* n) {
  if (n->type() == rx::node_data || n->type() == rx::node_cdata) return xml_escape(std::string(n->value(), n->value_size()));
  std::string s = "<" + std::string(n->name(), n->name_size());
  for (auto* a = n->first_attribute(); a; a = a->next_attribute())
    s += " " + std::string(a->name(), a->name_size()) + "=\"" + xml_escape(std::string(a->value(), a->value_size())) + "\"";
  if (!n->first_node()) return s + "/>";
  s += ">";
  for (auto* c = n->first_node(); c; c = c->next_sibling()) s += reprint(c);
  return s + "</" + std::string(n->name(), n->name_size()) + ">";
}

class DeckReader {
 public:
  explicit DeckReader(ProblemDeck& deck) : deck_(deck) {}

  std::optional<std::string> attr(const XmlNode* n, const char* name) {
    if (auto* a = n->first_attribute(name)) return std::string(a->value(), a->value_size());
    return std::nullopt;
  }

  std::string required(const XmlNode* n, const char* name) {
    auto v = attr(n, name);
    if (!v || v->empty())
      throw DeckParseError("missing attribute '" + std::string(name) + "' on " + node_path(n));
    return *v;
  }

  double number(const XmlNode* n, const char* name, const std::string& text) {
    double v = 0.0;
    auto t = trim(text);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
      throw DeckParseError("invalid number '" + text + "' for attribute '" + name + "' on " + node_path(n));
    return v;
  }

  double number_or(const XmlNode* n, const char* name, double fallback) {
    auto v = attr(n, name);
    return v ? number(n, name, *v) : fallback;
  }

  std::size_t count_or(const XmlNode* n, const char* name, std::size_t fallback) {
    auto v = attr(n, name);
    if (!v) return fallback;
    std::size_t out = 0;
    auto t = trim(*v);
    auto [ptr, ec] = std::from_chars(t.data(), t.data() + t.size(), out);
    if (t.empty() || ec != std::errc() || ptr != t.data() + t.size())
      throw DeckParseError("invalid count '" + *v + "' for attribute '" + name + "' on " + node_path(n));
    return out;
  }

  void warn_unknown_attributes(const XmlNode* n, std::initializer_list<std::string_view> known) {
    for (auto* a = n->first_attribute(); a; a = a->next_attribute()) {
      std::string_view an(a->name(), a->name_size());
      if (std::find(known.begin(), known.end(), an) == known.end())
        deck_.warnings.push_back("unknown attribute '" + std::string(an) + "' on " + node_path(n) + " ignored");
    }
  }

  void warn_unknown_children(const XmlNode* n, std::initializer_list<std::string_view> known) {
    for (auto* c = n->first_node(); c; c = c->next_sibling()) {
      if (c->type() != rx::node_element) continue;
      std::string_view cn(c->name(), c->name_size());
      if (std::find(known.begin(), known.end(), cn) == known.end())
        deck_.warnings.push_back("unknown element " + node_path(c) + " ignored");
    }
  }

  template <class Fn>
  void each(const XmlNode* parent, const char* name, Fn fn) {
    if (!parent) return;
    for (auto* c = parent->first_node(name); c; c = c->next_sibling(name)) fn(c);
  }

  void declare(const std::string& name, const XmlNode* where) {
    if (is_reserved_name(name))
      throw DeckParseError("duplicate/reserved name '" + name + "' at " + node_path(where) + " (reserved symbol)");
    if (!names_.insert(name).second)
      throw DeckParseError("duplicate/reserved name '" + name + "' at " + node_path(where) + " (already declared)");
  }

 private:
  ProblemDeck& deck_;
  std::set<std::string> names_;
};

inline std::vector<double> parse_number_list(DeckReader& r, const XmlNode* n, const char* name, const std::string& text) {
  std::vector<double> out;
  std::istringstream ss(text);
  std::string tok;
  while (ss >> tok) out.push_back(r.number(n, name, tok));
  return out;
}

inline std::pair<std::size_t, std::size_t> line_column(std::string_view text, std::size_t offset) {
  std::size_t line = 1, col = 1;
  for (std::size_t i = 0; i < offset && i < text.size(); ++i) {
    if (text[i] == '\n') {
      ++line;
      col = 1;
    } else {
      ++col;
    }
  }
  return {line, col};
}

}  // namespace detail

/// Parses deck XML. Absent optional blocks receive defaults; unknown
/// elements become warnings. Throws XmlSyntaxError / DeckParseError.
inline ProblemDeck parse_deck(std::string_view xml_text) {
  namespace rx = detail::rx;
  std::vector<char> buffer(xml_text.begin(), xml_text.end());
  buffer.push_back('\0');
  rx::xml_document<char> doc;
  try {
    doc.parse<rx::parse_validate_closing_tags>(buffer.data());
  } catch (const rx::parse_error& e) {
    const auto offset = static_cast<std::size_t>(e.where<char>() - buffer.data());
    auto [line, col] = detail::line_column(xml_text, offset);
    throw XmlSyntaxError(e.what(), line, col);
  }

  ProblemDeck deck;
  detail::DeckReader r(deck);
  const auto* root = doc.first_node("deck");
  if (!root) throw DeckParseError("root element must be <deck>");
  deck.name = r.attr(root, "name").value_or("");
  deck.mass_conserving = r.attr(root, "mass_conserving").value_or("false") == "true";
  r.warn_unknown_attributes(root, {"name", "mass_conserving"});

  static const std::initializer_list<std::string_view> known_blocks{
      "states", "parameters", "constants", "inputs", "rhs", "dataset", "loss", "solver", "optimizer", "outputs"};
  for (auto* c = root->first_node(); c; c = c->next_sibling()) {
    if (c->type() != rx::node_element) continue;
    std::string_view cn(c->name(), c->name_size());
    if (std::find(known_blocks.begin(), known_blocks.end(), cn) == known_blocks.end()) {
      deck.warnings.push_back("unknown element " + detail::node_path(c) + " preserved");
      deck.extra_elements.push_back(detail::reprint(c));
    }
  }

  const auto* states = root->first_node("states");
  r.each(states, "state", [&](const detail::XmlNode* n) {
    StateDecl s;
    s.name = r.required(n, "name");
    r.declare(s.name, n);
    if (auto* ic = n->first_node("initial")) s.initial = detail::node_text(ic);
    else s.initial = std::string(detail::trim(r.attr(n, "initial").value_or("")));
    r.warn_unknown_attributes(n, {"name", "initial"});
    r.warn_unknown_children(n, {"initial"});
    deck.states.push_back(std::move(s));
  });
  if (deck.states.empty()) throw DeckParseError("missing mandatory block: states");
  if (states) r.warn_unknown_children(states, {"state"});

  const auto* params = root->first_node("parameters");
  r.each(params, "parameter", [&](const detail::XmlNode* n) {
    ParamDecl p;
    p.name = r.required(n, "name");
    r.declare(p.name, n);
    p.lower = r.number(n, "lower", r.required(n, "lower"));
    p.upper = r.number(n, "upper", r.required(n, "upper"));
    const auto scale = r.attr(n, "scale").value_or("auto");
    if (scale == "linear") p.scale = ParamScale::linear;
    else if (scale == "log10") p.scale = ParamScale::log10;
    else if (scale == "auto") p.scale = ParamScale::automatic;
    else throw DeckParseError("invalid scale '" + scale + "' on parameter '" + p.name + "'");
    r.warn_unknown_attributes(n, {"name", "lower", "upper", "scale"});
    deck.parameters.push_back(std::move(p));
  });
  if (deck.parameters.empty()) throw DeckParseError("missing mandatory block: parameters");
  if (params) r.warn_unknown_children(params, {"parameter"});

  const auto* constants = root->first_node("constants");
  r.each(constants, "constant", [&](const detail::XmlNode* n) {
    ConstantDecl c;
    c.name = r.required(n, "name");
    r.declare(c.name, n);
    c.value = r.number(n, "value", r.required(n, "value"));
    r.warn_unknown_attributes(n, {"name", "value"});
    deck.constants.push_back(std::move(c));
  });
  if (constants) r.warn_unknown_children(constants, {"constant"});

  const auto* inputs = root->first_node("inputs");
  r.each(inputs, "input", [&](const detail::XmlNode* n) {
    InputDecl in;
    in.name = r.required(n, "name");
    r.declare(in.name, n);
    r.declare(in.name + "_dot", n);
    in.expression = detail::node_text(n);
    r.warn_unknown_attributes(n, {"name"});
    deck.inputs.push_back(std::move(in));
  });
  if (inputs) r.warn_unknown_children(inputs, {"input"});

  const auto* rhs = root->first_node("rhs");
  if (!rhs) throw DeckParseError("missing mandatory block: rhs");
  r.each(rhs, "equation", [&](const detail::XmlNode* n) {
    RhsEntry e;
    e.state = r.required(n, "state");
    e.expression = detail::node_text(n);
    r.warn_unknown_attributes(n, {"state"});
    if (e.expression.empty()) return;  // unfilled template slot
    if (deck.rhs_for(e.state)) throw DeckParseError("duplicate/reserved name: second equation for state '" + e.state + "'");
    deck.rhs.push_back(std::move(e));
  });
  r.warn_unknown_children(rhs, {"equation"});

  const auto* ds = root->first_node("dataset");
  if (!ds) throw DeckParseError("missing mandatory block: dataset");
  deck.dataset.path = r.required(ds, "path");
  deck.dataset.time_column = r.attr(ds, "time_column").value_or("t");
  {
    const auto rs = r.attr(ds, "rate_source").value_or("finite_difference");
    if (rs == "column") deck.dataset.rate_source = RateSource::column;
    else if (rs == "finite_difference") deck.dataset.rate_source = RateSource::finite_difference;
    else throw DeckParseError("invalid rate_source '" + rs + "'");
  }
  r.warn_unknown_attributes(ds, {"path", "time_column", "rate_source"});
  r.each(ds, "column", [&](const detail::XmlNode* n) {
    ColumnBinding b{r.required(n, "name"), r.required(n, "signal")};
    if (!parse_signal(b.signal)) throw DeckParseError("invalid signal '" + b.signal + "' for column '" + b.column + "'");
    r.warn_unknown_attributes(n, {"name", "signal"});
    deck.dataset.columns.push_back(std::move(b));
  });
  r.warn_unknown_children(ds, {"column"});
  for (auto& s : deck.states)
    for (const auto& b : deck.dataset.columns)
      if (b.signal == s.name) s.observed = b.column;

  r.each(root->first_node("loss"), "term", [&](const detail::XmlNode* n) {
    LossTerm t;
    t.signal = r.required(n, "signal");
    const auto tr = r.attr(n, "transform").value_or("identity");
    if (tr == "identity") t.transform = Transform::identity;
    else if (tr == "log10") t.transform = Transform::log10;
    else throw DeckParseError("invalid transform '" + tr + "'");
    t.weight = r.number_or(n, "weight", 1.0);
    const auto sc = r.attr(n, "scale").value_or("1");
    if (sc == "max_abs_of_data") t.scale_max_abs = true;
    else t.scale = r.number(n, "scale", sc);
    const auto red = r.attr(n, "reduction").value_or("mean_square");
    if (red == "mean_square") t.reduction = Reduction::mean_square;
    else if (red == "root_mean_square") t.reduction = Reduction::root_mean_square;
    else throw DeckParseError("invalid reduction '" + red + "'");
    if (auto w = r.attr(n, "window")) {
      auto v = detail::parse_number_list(r, n, "window", *w);
      if (v.size() != 2) throw DeckParseError("window must hold two numbers: '" + *w + "'");
      t.window = std::make_pair(v[0], v[1]);
    }
    r.warn_unknown_attributes(n, {"signal", "transform", "weight", "scale", "reduction", "window"});
    deck.loss.push_back(std::move(t));
  });
  if (auto* l = root->first_node("loss")) r.warn_unknown_children(l, {"term"});

  if (const auto* s = root->first_node("solver")) {
    auto& c = deck.solver;
    const auto m = r.attr(s, "method").value_or("tr_bdf2");
    if (m == "dopri5") c.method = Method::dopri5;
    else if (m == "tr_bdf2") c.method = Method::tr_bdf2;
    else throw DeckParseError("invalid solver method '" + m + "'");
    c.rtol = r.number_or(s, "rtol", c.rtol);
    if (auto a = r.attr(s, "atol")) c.atol = detail::parse_number_list(r, s, "atol", *a);
    if (c.atol.empty()) throw DeckParseError("solver atol must hold at least one value");
    c.t0 = r.number_or(s, "t0", c.t0);
    if (auto t1 = r.attr(s, "t1")) c.t1 = r.number(s, "t1", *t1);
    c.max_steps = r.count_or(s, "max_steps", c.max_steps);
    if (auto h = r.attr(s, "initial_step")) c.initial_step = r.number(s, "initial_step", *h);
    c.adaptive = r.attr(s, "adaptive").value_or("true") != "false";
    c.controller.safety = r.number_or(s, "safety", c.controller.safety);
    c.controller.min_factor = r.number_or(s, "min_factor", c.controller.min_factor);
    c.controller.max_factor = r.number_or(s, "max_factor", c.controller.max_factor);
    c.controller.pi_alpha = r.number_or(s, "pi_alpha", c.controller.pi_alpha);
    c.controller.pi_beta = r.number_or(s, "pi_beta", c.controller.pi_beta);
    r.warn_unknown_attributes(s, {"method", "rtol", "atol", "t0", "t1", "max_steps", "initial_step", "adaptive",
                                  "safety", "min_factor", "max_factor", "pi_alpha", "pi_beta"});
  }

  if (const auto* o = root->first_node("optimizer")) {
    if (const auto* p = o->first_node("pso")) {
      auto& c = deck.optimizer.pso;
      c.swarm_size = r.count_or(p, "swarm_size", c.swarm_size);
      c.iterations = r.count_or(p, "iterations", c.iterations);
      c.w = r.number_or(p, "w", c.w);
      c.c1 = r.number_or(p, "c1", c.c1);
      c.c2 = r.number_or(p, "c2", c.c2);
      c.seed = r.count_or(p, "seed", c.seed);
      r.warn_unknown_attributes(p, {"swarm_size", "iterations", "w", "c1", "c2", "seed"});
    }
    if (const auto* l = o->first_node("lbfgs")) {
      auto& c = deck.optimizer.lbfgs;
      c.max_iterations = r.count_or(l, "max_iterations", c.max_iterations);
      c.memory = r.count_or(l, "memory", c.memory);
      c.grad_tolerance = r.number_or(l, "grad_tolerance", c.grad_tolerance);
      c.loss_rel_tolerance = r.number_or(l, "loss_rel_tolerance", c.loss_rel_tolerance);
      r.warn_unknown_attributes(l, {"max_iterations", "memory", "grad_tolerance", "loss_rel_tolerance"});
    }
    r.warn_unknown_children(o, {"pso", "lbfgs"});
  }

  if (const auto* o = root->first_node("outputs")) {
    deck.outputs.clear();
    std::istringstream ss(detail::node_text(o));
    std::string tok;
    while (ss >> tok) {
      const auto& kinds = all_output_kinds();
      if (std::find(kinds.begin(), kinds.end(), tok) == kinds.end()) {
        deck.warnings.push_back("unknown output '" + tok + "' ignored");
        continue;
      }
      if (std::find(deck.outputs.begin(), deck.outputs.end(), tok) == deck.outputs.end()) deck.outputs.push_back(tok);
    }
  }
  return deck;
}

namespace detail {

inline std::string fmt(double v) { return format_double(v); }

inline std::string fmt_list(const std::vector<double>& v) {
  std::string s;
  for (std::size_t i = 0; i < v.size(); ++i) s += (i ? " " : "") + fmt(v[i]);
  return s;
}

// Shared writer for canonical serialization and skeleton emission. In
// skeleton mode every missing expression becomes a FILL comment slot.
inline std::string write_deck(const ProblemDeck& d, bool skeleton) {
  std::ostringstream o;
  o << "<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n";
  if (skeleton)
    o << "<!-- Model definition template. Replace every FILL comment with a DSL expression"
         " (see docs/dsl.md). -->\n";
  o << "<deck name=\"" << xml_escape(d.name) << "\"";
  if (d.mass_conserving) o << " mass_conserving=\"true\"";
  o << ">\n";

  o << "  <states>\n";
  for (const auto& s : d.states) {
    o << "    <state name=\"" << xml_escape(s.name) << "\"";
    if (!s.initial.empty()) o << ">\n      <initial>" << xml_escape(s.initial) << "</initial>\n    </state>\n";
    else if (skeleton) o << ">\n      <initial><!-- FILL: initial condition of " << s.name << " --></initial>\n    </state>\n";
    else o << "/>\n";
  }
  o << "  </states>\n";

  o << "  <parameters>\n";
  for (const auto& p : d.parameters)
    o << "    <parameter name=\"" << xml_escape(p.name) << "\" lower=\"" << fmt(p.lower) << "\" upper=\""
      << fmt(p.upper) << "\" scale=\"" << to_string(p.scale) << "\"/>\n";
  o << "  </parameters>\n";

  if (!d.constants.empty()) {
    o << "  <constants>\n";
    for (const auto& c : d.constants)
      o << "    <constant name=\"" << xml_escape(c.name) << "\" value=\"" << fmt(c.value) << "\"/>\n";
    o << "  </constants>\n";
  }

  if (!d.inputs.empty()) {
    o << "  <inputs>\n";
    for (const auto& in : d.inputs) {
      o << "    <input name=\"" << xml_escape(in.name) << "\">";
      if (!in.expression.empty()) o << xml_escape(in.expression);
      else if (skeleton) o << "<!-- FILL: expression of input " << in.name << " in t -->";
      o << "</input>\n";
    }
    o << "  </inputs>\n";
  }

  o << "  <rhs>\n";
  for (const auto& s : d.states) {
    if (const auto* e = d.rhs_for(s.name))
      o << "    <equation state=\"" << xml_escape(s.name) << "\">" << xml_escape(e->expression) << "</equation>\n";
    else if (skeleton)
      o << "    <equation state=\"" << xml_escape(s.name) << "\"><!-- FILL: rhs of " << s.name << " --></equation>\n";
  }
  for (const auto& e : d.rhs)
    if (d.state_index(e.state) < 0)
      o << "    <equation state=\"" << xml_escape(e.state) << "\">" << xml_escape(e.expression) << "</equation>\n";
  o << "  </rhs>\n";

  o << "  <dataset path=\"" << xml_escape(d.dataset.path) << "\" time_column=\"" << xml_escape(d.dataset.time_column)
    << "\" rate_source=\"" << to_string(d.dataset.rate_source) << "\"";
  if (d.dataset.columns.empty()) {
    o << "/>\n";
  } else {
    o << ">\n";
    for (const auto& b : d.dataset.columns)
      o << "    <column name=\"" << xml_escape(b.column) << "\" signal=\"" << xml_escape(b.signal) << "\"/>\n";
    o << "  </dataset>\n";
  }

  if (!d.loss.empty() || (skeleton && !d.dataset.columns.empty())) {
    o << "  <loss>\n";
    for (const auto& t : d.loss) {
      o << "    <term signal=\"" << xml_escape(t.signal) << "\" transform=\"" << to_string(t.transform)
        << "\" weight=\"" << fmt(t.weight) << "\" scale=\""
        << (t.scale_max_abs ? std::string("max_abs_of_data") : fmt(t.scale)) << "\" reduction=\""
        << to_string(t.reduction) << "\"";
      if (t.window) o << " window=\"" << fmt(t.window->first) << " " << fmt(t.window->second) << "\"";
      o << "/>\n";
    }
    if (skeleton && d.loss.empty())
      for (const auto& b : d.dataset.columns) o << "    <!-- FILL: loss term for signal " << b.signal << " -->\n";
    o << "  </loss>\n";
  }

  const auto& s = d.solver;
  o << "  <solver method=\"" << to_string(s.method) << "\" rtol=\"" << fmt(s.rtol) << "\" atol=\"" << fmt_list(s.atol)
    << "\" t0=\"" << fmt(s.t0) << "\"";
  if (s.t1) o << " t1=\"" << fmt(*s.t1) << "\"";
  o << " max_steps=\"" << s.max_steps << "\"";
  if (s.initial_step) o << " initial_step=\"" << fmt(*s.initial_step) << "\"";
  o << " adaptive=\"" << (s.adaptive ? "true" : "false") << "\" safety=\"" << fmt(s.controller.safety)
    << "\" min_factor=\"" << fmt(s.controller.min_factor) << "\" max_factor=\"" << fmt(s.controller.max_factor)
    << "\" pi_alpha=\"" << fmt(s.controller.pi_alpha) << "\" pi_beta=\"" << fmt(s.controller.pi_beta) << "\"/>\n";

  const auto& p = d.optimizer.pso;
  const auto& l = d.optimizer.lbfgs;
  o << "  <optimizer>\n";
  o << "    <pso swarm_size=\"" << p.swarm_size << "\" iterations=\"" << p.iterations << "\" w=\"" << fmt(p.w)
    << "\" c1=\"" << fmt(p.c1) << "\" c2=\"" << fmt(p.c2) << "\" seed=\"" << p.seed << "\"/>\n";
  o << "    <lbfgs max_iterations=\"" << l.max_iterations << "\" memory=\"" << l.memory << "\" grad_tolerance=\""
    << fmt(l.grad_tolerance) << "\" loss_rel_tolerance=\"" << fmt(l.loss_rel_tolerance) << "\"/>\n";
  o << "  </optimizer>\n";

  o << "  <outputs>";
  for (std::size_t i = 0; i < d.outputs.size(); ++i) o << (i ? " " : "") << d.outputs[i];
  o << "</outputs>\n";

  for (const auto& x : d.extra_elements) o << "  " << x << "\n";
  o << "</deck>\n";
  return o.str();
}

}  // namespace detail

/// Canonical XML. Defaults are written explicitly; parse(serialize(d)) == d.
inline std::string serialize_deck(const ProblemDeck& deck) { return detail::write_deck(deck, false); }

/// Model-definition template: the canonical deck with one FILL comment slot
/// per missing initial condition, right-hand side, input expression and
/// (when no loss is declared) per bound signal. Filled expressions are
/// echoed verbatim.
inline std::string generate_skeleton(const ProblemDeck& deck) { return detail::write_deck(deck, true); }

/// Counts FILL slots in a skeleton.
inline std::size_t count_fill_slots(std::string_view text) {
  std::size_t n = 0;
  for (auto p = text.find("<!-- FILL:"); p != std::string_view::npos; p = text.find("<!-- FILL:", p + 1)) ++n;
  return n;
}

/// Reads the dataset CSV (path relative to `base_dir`) into deck.dataset.table.
/// Failures are recorded in deck.dataset.load_error for lint to report.
inline void load_dataset(ProblemDeck& deck, const std::filesystem::path& base_dir) {
  deck.dataset.table.reset();
  deck.dataset.load_error.clear();
  std::filesystem::path p(deck.dataset.path);
  if (p.is_relative()) p = base_dir / p;
  try {
    deck.dataset.table = read_csv_file(p.string());
  } catch (const CsvError& e) {
    deck.dataset.load_error = e.what();
  }
}

}  // namespace odefit
