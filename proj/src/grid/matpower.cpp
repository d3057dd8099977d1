#include <cerrno>
#include <cmath>
#include <cstdlib>
#include <fstream>
#include <map>
#include <sstream>

#include "vaopf/grid.hpp"

namespace vaopf {

namespace {

using Matrix = std::vector<std::vector<double>>;

// 1-based MATPOWER column indices.
constexpr int kBusI = 1, kPd = 3;
constexpr int kFBus = 1, kTBus = 2, kBrX = 4, kRateA = 6, kBrStatus = 11;
constexpr int kGenBus = 1, kPmax = 9, kPmin = 10;
constexpr int kModel = 1, kNcost = 4;

std::string strip_comments(const std::string& text) {
  std::string out;
  out.reserve(text.size());
  bool in_comment = false;
  for (char c : text) {
    if (c == '\n') in_comment = false;
    if (c == '%') in_comment = true;
    if (!in_comment) out.push_back(c);
  }
  return out;
}

std::vector<double> parse_row(const std::string& row, const std::string& block) {
  std::vector<double> values;
  std::istringstream in(row);
  std::string tok;
  while (in >> tok) {
    char* end = nullptr;
    errno = 0;
    const double v = std::strtod(tok.c_str(), &end);
    if (end != tok.c_str() + tok.size() || errno == ERANGE)
      throw ParseError("malformed matrix block mpc." + block + ": bad number '" + tok + "'");
    values.push_back(v);
  }
  return values;
}

Matrix parse_block(const std::string& body, const std::string& block) {
  Matrix rows;
  std::string current;
  auto flush = [&] {
    auto r = parse_row(current, block);
    if (!r.empty()) rows.push_back(std::move(r));
    current.clear();
  };
  for (char c : body) {
    if (c == ';' || c == '\n') {
      flush();
    } else {
      current.push_back(c == ',' ? ' ' : c);
    }
  }
  flush();
  for (const auto& r : rows)
    if (r.size() != rows.front().size()) throw ParseError("malformed matrix block mpc." + block + ": ragged rows");
  return rows;
}

struct Case {
  std::optional<double> base_mva;
  std::map<std::string, Matrix> blocks;
};

Case tokenize(const std::string& raw) {
  const std::string text = strip_comments(raw);
  Case c;
  std::size_t pos = 0;
  while ((pos = text.find("mpc.", pos)) != std::string::npos) {
    std::size_t k = pos + 4;
    std::size_t name_end = k;
    while (name_end < text.size() && (std::isalnum(static_cast<unsigned char>(text[name_end])) || text[name_end] == '_'))
      ++name_end;
    const std::string name = text.substr(k, name_end - k);
    std::size_t eq = text.find_first_not_of(" \t", name_end);
    if (eq == std::string::npos || text[eq] != '=') {
      pos = name_end;
      continue;
    }
    std::size_t val = text.find_first_not_of(" \t\r\n", eq + 1);
    if (val == std::string::npos) throw ParseError("mpc." + name + " has no value");
    if (text[val] == '[') {
      const std::size_t close = text.find(']', val);
      if (close == std::string::npos) throw ParseError("malformed matrix block mpc." + name + ": missing ']'");
      if (name == "bus" || name == "branch" || name == "gen" || name == "gencost")
        c.blocks[name] = parse_block(text.substr(val + 1, close - val - 1), name);
      pos = close + 1;
    } else {
      const std::size_t semi = text.find_first_of(";\n", val);
      const std::string value = text.substr(val, semi == std::string::npos ? std::string::npos : semi - val);
      if (name == "baseMVA") {
        const auto v = parse_row(value, name);
        if (v.size() != 1) throw ParseError("mpc.baseMVA must be a single number");
        c.base_mva = v.front();
      }
      pos = semi == std::string::npos ? text.size() : semi + 1;
    }
  }
  return c;
}

void require_columns(const Matrix& m, std::size_t cols, const std::string& block) {
  if (!m.empty() && m.front().size() < cols)
    throw ParseError("malformed matrix block mpc." + block + ": expected at least " + std::to_string(cols) + " columns");
}

std::string fmt(double v) {
  std::ostringstream out;
  out.precision(17);
  out << v;
  return out.str();
}

}  // namespace

double unlimited_line_limit(double total_load) { return 100.0 * std::max(total_load, 1.0); }

Grid parse_matpower(const std::string& text, const MatpowerOptions& options) {
  const Case c = tokenize(text);
  for (const char* name : {"bus", "branch", "gen"})
    if (!c.blocks.count(name)) throw ParseError(std::string("missing matrix block mpc.") + name);
  const Matrix& bus = c.blocks.at("bus");
  const Matrix& branch = c.blocks.at("branch");
  const Matrix& gen = c.blocks.at("gen");
  require_columns(bus, kPd, "bus");
  require_columns(branch, kBrStatus, "branch");
  require_columns(gen, kPmin, "gen");
  if (bus.empty()) throw ParseError("mpc.bus is empty");

  Grid g;
  g.base_mva = c.base_mva.value_or(100.0);
  std::map<long, int> index;
  for (const auto& row : bus) {
    const long label = std::lround(row[kBusI - 1]);
    if (index.count(label)) throw ParseError("duplicate bus " + std::to_string(label));
    const int id = static_cast<int>(g.buses.size());
    index[label] = id;
    if (row[kPd - 1] < 0.0) throw ParseError("bus " + std::to_string(label) + " has negative load");
    g.buses.push_back({id, label, row[kPd - 1], 0.0});
  }
  auto lookup = [&index](double label, const std::string& what) {
    const auto it = index.find(std::lround(label));
    if (it == index.end()) throw ParseError(what + " references unknown bus " + std::to_string(std::lround(label)));
    return it->second;
  };

  const double big_m = unlimited_line_limit(g.total_load());
  for (const auto& row : branch) {
    if (row[kBrStatus - 1] == 0.0) continue;
    Line ln;
    ln.from_bus = lookup(row[kFBus - 1], "branch");
    ln.to_bus = lookup(row[kTBus - 1], "branch");
    if (ln.from_bus == ln.to_bus) throw ParseError("branch is a self-loop at bus " + std::to_string(g.buses[ln.from_bus].label));
    ln.reactance = row[kBrX - 1];
    if (!(ln.reactance > 0.0)) throw ParseError("branch has non-positive reactance");
    ln.limit = row[kRateA - 1] == 0.0 ? big_m : row[kRateA - 1];
    ln.safety_param = options.line_safety_param;
    g.lines.push_back(ln);
  }

  for (const auto& row : gen) {
    Generator gn;
    gn.bus = lookup(row[kGenBus - 1], "generator");
    if (g.generator_at(gn.bus) >= 0)
      throw ParseError("duplicate generator on bus " + std::to_string(g.buses[gn.bus].label));
    gn.p_max = row[kPmax - 1];
    gn.p_min = row[kPmin - 1];
    gn.safety_param = options.generator_safety_param;
    g.generators.push_back(gn);
  }

  if (!g.generators.empty()) {
    if (!c.blocks.count("gencost")) throw ParseError("missing matrix block mpc.gencost");
    const Matrix& cost = c.blocks.at("gencost");
    if (cost.size() < g.generators.size()) throw ParseError("mpc.gencost has fewer rows than mpc.gen");
    for (std::size_t k = 0; k < g.generators.size(); ++k) {
      const auto& row = cost[k];
      if (row.size() < kNcost) throw ParseError("malformed matrix block mpc.gencost: short row");
      if (row[kModel - 1] != 2.0) throw ParseError("mpc.gencost: only polynomial cost (MODEL = 2) is supported");
      const int ncost = static_cast<int>(std::lround(row[kNcost - 1]));
      if (ncost != 2 && ncost != 3) throw ParseError("mpc.gencost: NCOST must be 2 or 3");
      if (row.size() < static_cast<std::size_t>(kNcost + ncost)) throw ParseError("malformed matrix block mpc.gencost: missing coefficients");
      auto& gn = g.generators[k];
      const double* coef = row.data() + kNcost;  // highest degree first
      if (ncost == 3) {
        gn.cost_c0 = coef[0];
        gn.cost_c1 = coef[1];
        gn.cost_c2 = coef[2];
      } else {
        gn.cost_c1 = coef[0];
        gn.cost_c2 = coef[1];
      }
    }
  }

  if (!is_connected(g)) throw ParseError("line graph is disconnected");
  g.slack_bus = g.num_buses() - 1;
  if (options.slack_label) g.slack_bus = lookup(static_cast<double>(*options.slack_label), "slack override");
  return g;
}

Grid load_matpower(const std::string& path, const MatpowerOptions& options) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open case file " + path);
  std::stringstream buf;
  buf << in.rdbuf();
  return parse_matpower(buf.str(), options);
}

std::string write_matpower(const Grid& grid) {
  std::ostringstream out;
  out << "function mpc = vaopf_case\n";
  out << "mpc.version = '2';\n";
  out << "mpc.baseMVA = " << fmt(grid.base_mva) << ";\n\n";
  out << "%\tbus_i\ttype\tPd\tQd\tGs\tBs\tarea\tVm\tVa\tbaseKV\tzone\tVmax\tVmin\n";
  out << "mpc.bus = [\n";
  for (const auto& b : grid.buses)
    out << '\t' << b.label << '\t' << (b.id == grid.slack_bus ? 3 : 1) << '\t' << fmt(b.load)
        << "\t0\t0\t0\t1\t1\t0\t1\t1\t1.1\t0.9;\n";
  out << "];\n\n";
  out << "%\tbus\tPg\tQg\tQmax\tQmin\tVg\tmBase\tstatus\tPmax\tPmin\n";
  out << "mpc.gen = [\n";
  for (const auto& g : grid.generators)
    out << '\t' << grid.buses[g.bus].label << "\t0\t0\t0\t0\t1\t" << fmt(grid.base_mva) << "\t1\t" << fmt(g.p_max) << '\t'
        << fmt(g.p_min) << ";\n";
  out << "];\n\n";
  out << "%\tfbus\ttbus\tr\tx\tb\trateA\trateB\trateC\tratio\tangle\tstatus\tangmin\tangmax\n";
  out << "mpc.branch = [\n";
  for (const auto& l : grid.lines)
    out << '\t' << grid.buses[l.from_bus].label << '\t' << grid.buses[l.to_bus].label << "\t0\t" << fmt(l.reactance)
        << "\t0\t" << fmt(l.limit) << "\t0\t0\t0\t0\t1\t-360\t360;\n";
  out << "];\n\n";
  out << "%\t2\tstartup\tshutdown\tn\tc2\tc1\tc0\n";
  out << "mpc.gencost = [\n";
  for (const auto& g : grid.generators)
    out << "\t2\t0\t0\t3\t" << fmt(g.cost_c0) << '\t' << fmt(g.cost_c1) << '\t' << fmt(g.cost_c2) << ";\n";
  out << "];\n";
  return out.str();
}

}  // namespace vaopf
