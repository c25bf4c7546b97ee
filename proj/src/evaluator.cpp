#include "prefscore/evaluator.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <numeric>
#include <sstream>

#include "prefscore/instructions.hpp"

namespace prefscore {

double pairwise_accuracy(std::span<const ScoredPair> scored) {
  if (scored.empty()) throw ValidationError("pairwise_accuracy: empty list");
  std::size_t correct = 0;
  for (const auto& s : scored) {
    if (!std::isfinite(s.r_good) || !std::isfinite(s.r_bad)) {
      throw ValidationError("pairwise_accuracy: non-finite score in pair \"" + s.id + "\"");
    }
    if (s.r_good > s.r_bad) ++correct;
  }
  return static_cast<double>(correct) / static_cast<double>(scored.size());
}

double tie_fraction(std::span<const ScoredPair> scored) {
  if (scored.empty()) throw ValidationError("tie_fraction: empty list");
  std::size_t ties = 0;
  for (const auto& s : scored) {
    if (s.r_good == s.r_bad) ++ties;
  }
  return static_cast<double>(ties) / static_cast<double>(scored.size());
}

std::vector<double> average_ranks(std::span<const double> values) {
  const std::size_t n = values.size();
  std::vector<std::size_t> order(n);
  std::iota(order.begin(), order.end(), 0);
  std::sort(order.begin(), order.end(),
            [&](std::size_t a, std::size_t b) { return values[a] < values[b]; });

  std::vector<double> ranks(n, 0.0);
  std::size_t i = 0;
  while (i < n) {
    std::size_t j = i;
    while (j + 1 < n && values[order[j + 1]] == values[order[i]]) ++j;
    // positions i..j (0-based) share the averaged 1-based rank
    const double rank = (static_cast<double>(i) + static_cast<double>(j)) / 2.0 + 1.0;
    for (std::size_t k = i; k <= j; ++k) ranks[order[k]] = rank;
    i = j + 1;
  }
  return ranks;
}

namespace {

struct Moments {
  double mean_x, mean_y, var_x, var_y, cov;
};

Moments moments(std::span<const double> x, std::span<const double> y) {
  const double n = static_cast<double>(x.size());
  double mx = 0.0, my = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    mx += x[i];
    my += y[i];
  }
  mx /= n;
  my /= n;
  double vx = 0.0, vy = 0.0, cov = 0.0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    const double dx = x[i] - mx;
    const double dy = y[i] - my;
    vx += dx * dx;
    vy += dy * dy;
    cov += dx * dy;
  }
  return Moments{mx, my, vx, vy, cov};
}

}  // namespace

double pearson(std::span<const double> x, std::span<const double> y) {
  if (x.size() != y.size()) throw ValidationError("pearson: length mismatch");
  if (x.size() < 3) throw ValidationError("pearson: need at least 3 points");
  const Moments m = moments(x, y);
  if (m.var_x == 0.0 || m.var_y == 0.0) {
    throw ValidationError("pearson: zero variance");
  }
  return m.cov / std::sqrt(m.var_x * m.var_y);
}

std::optional<double> spearman(std::span<const double> model_scores,
                               std::span<const double> human_scores) {
  if (model_scores.size() != human_scores.size()) {
    throw ValidationError("spearman: length mismatch");
  }
  if (model_scores.size() < 3) throw ValidationError("spearman: need at least 3 points");
  const std::vector<double> rx = average_ranks(model_scores);
  const std::vector<double> ry = average_ranks(human_scores);
  const Moments m = moments(rx, ry);
  if (m.var_x == 0.0 || m.var_y == 0.0) return std::nullopt;
  return m.cov / std::sqrt(m.var_x * m.var_y);
}

const CellStats* RunReport::cell(const std::string& task, const std::string& setup) const {
  auto it = cells.find({task, setup});
  return it == cells.end() ? nullptr : &it->second;
}

double RunReport::column_average(const std::string& setup) const {
  double sum = 0.0;
  std::size_t n = 0;
  for (const auto& task : tasks) {
    if (const CellStats* c = cell(task, setup)) {
      sum += c->mean;
      ++n;
    }
  }
  if (n == 0) throw ValidationError("column_average: no cells for setup \"" + setup + "\"");
  return sum / static_cast<double>(n);
}

RunReport aggregate(std::span<const SeedResult> results) {
  if (results.empty()) throw ValidationError("aggregate: no results");
  RunReport report;
  std::map<std::pair<std::string, std::string>, std::vector<const SeedResult*>> groups;
  for (const auto& r : results) {
    if (std::find(report.tasks.begin(), report.tasks.end(), r.task) == report.tasks.end()) {
      report.tasks.push_back(r.task);
    }
    if (std::find(report.setups.begin(), report.setups.end(), r.setup) ==
        report.setups.end()) {
      report.setups.push_back(r.setup);
    }
    groups[{r.task, r.setup}].push_back(&r);
  }
  for (const auto& [key, rows] : groups) {
    CellStats stats;
    stats.n_seeds = static_cast<int>(rows.size());
    double sum = 0.0;
    for (const auto* r : rows) sum += r->accuracy;
    stats.mean = sum / static_cast<double>(rows.size());
    if (rows.size() > 1) {
      double ss = 0.0;
      for (const auto* r : rows) {
        const double d = r->accuracy - stats.mean;
        ss += d * d;
      }
      stats.stddev = std::sqrt(ss / static_cast<double>(rows.size() - 1));
    }
    double rho_sum = 0.0;
    int rho_n = 0;
    for (const auto* r : rows) {
      if (r->spearman_rho) {
        rho_sum += *r->spearman_rho;
        ++rho_n;
      }
    }
    if (rho_n > 0) stats.spearman_rho = rho_sum / rho_n;
    report.cells[key] = stats;
  }
  return report;
}

namespace {

std::string fmt(double v, const char* spec = "%.2f") {
  char buf[64];
  std::snprintf(buf, sizeof(buf), spec, v);
  return buf;
}

}  // namespace

void write_report_csv(const RunReport& report, std::ostream& out) {
  out << "task,setup,acc_mean,acc_std,n_seeds,spearman\n";
  for (const auto& task : report.tasks) {
    for (const auto& setup : report.setups) {
      const CellStats* c = report.cell(task, setup);
      if (!c) continue;
      out << task << ',' << setup << ',' << fmt(c->mean) << ',' << fmt(c->stddev) << ','
          << c->n_seeds << ',' << (c->spearman_rho ? fmt(*c->spearman_rho, "%.3f") : "-")
          << '\n';
    }
  }
}

void write_report_text(const RunReport& report, std::ostream& out) {
  // Task rows, one accuracy column per setup (mean+-std), then rho columns
  // for setups that have any correlation values.
  std::vector<std::string> rho_setups;
  for (const auto& setup : report.setups) {
    for (const auto& task : report.tasks) {
      const CellStats* c = report.cell(task, setup);
      if (c && c->spearman_rho) {
        rho_setups.push_back(setup);
        break;
      }
    }
  }

  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> header{"task"};
  for (const auto& s : report.setups) header.push_back(s);
  for (const auto& s : rho_setups) header.push_back("rho(" + s + ")");
  rows.push_back(header);

  for (const auto& task : report.tasks) {
    std::vector<std::string> row{task};
    for (const auto& setup : report.setups) {
      const CellStats* c = report.cell(task, setup);
      row.push_back(c ? fmt(c->mean) + "+-" + fmt(c->stddev) : "-");
    }
    for (const auto& setup : rho_setups) {
      const CellStats* c = report.cell(task, setup);
      row.push_back(c && c->spearman_rho ? fmt(*c->spearman_rho, "%.3f") : "-");
    }
    rows.push_back(std::move(row));
  }

  std::vector<std::string> avg_row{"average"};
  for (const auto& setup : report.setups) avg_row.push_back(fmt(report.column_average(setup)));
  for (std::size_t i = 0; i < rho_setups.size(); ++i) avg_row.push_back("-");
  rows.push_back(std::move(avg_row));

  std::vector<std::size_t> widths(rows.front().size(), 0);
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) widths[c] = std::max(widths[c], row[c].size());
  }
  for (const auto& row : rows) {
    for (std::size_t c = 0; c < row.size(); ++c) {
      out << row[c];
      if (c + 1 < row.size()) out << std::string(widths[c] - row[c].size() + 2, ' ');
    }
    out << '\n';
  }
}

void emit_report(const RunReport& report, const std::filesystem::path& path,
                 const std::string& format) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write report: " + path.string());
  if (format == "csv") {
    write_report_csv(report, out);
  } else if (format == "text") {
    write_report_text(report, out);
  } else {
    throw ValidationError("emit_report: unknown format \"" + format + "\"");
  }
  if (!out) throw std::runtime_error("failed writing report: " + path.string());
}

void save_seed_results(const std::filesystem::path& path, std::span<const SeedResult> rows) {
  std::ofstream out(path);
  if (!out) throw std::runtime_error("cannot write results: " + path.string());
  out << "task,setup,seed,accuracy,tie_fraction,spearman\n";
  for (const auto& r : rows) {
    out << r.task << ',' << r.setup << ',' << r.seed << ',' << fmt(r.accuracy, "%.17g")
        << ',' << fmt(r.tie_frac, "%.17g") << ','
        << (r.spearman_rho ? fmt(*r.spearman_rho, "%.17g") : "-") << '\n';
  }
}

std::vector<SeedResult> load_seed_results(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw ParseError("cannot open results file: " + path.string());
  std::string line;
  if (!std::getline(in, line)) throw ParseError("results file is empty: " + path.string());
  std::vector<SeedResult> rows;
  std::size_t lineno = 1;
  while (std::getline(in, line)) {
    ++lineno;
    if (line.empty()) continue;
    std::stringstream ss(line);
    std::string field;
    std::vector<std::string> fields;
    while (std::getline(ss, field, ',')) fields.push_back(field);
    if (fields.size() != 6) {
      throw ParseError("results file line " + std::to_string(lineno) +
                       ": expected 6 fields, got " + std::to_string(fields.size()));
    }
    SeedResult r;
    r.task = fields[0];
    r.setup = fields[1];
    try {
      r.seed = std::stoull(fields[2]);
      r.accuracy = std::stod(fields[3]);
      r.tie_frac = std::stod(fields[4]);
      if (fields[5] != "-") r.spearman_rho = std::stod(fields[5]);
    } catch (const std::exception&) {
      throw ParseError("results file line " + std::to_string(lineno) + ": bad number");
    }
    rows.push_back(std::move(r));
  }
  return rows;
}

EvalOutcome evaluate_model(const ScorerModel& model,
                           std::span<const PreferencePair> test_pairs,
                           const TaskRegistry& registry, const TrainConfig& cfg,
                           const Vocabulary& vocab) {
  if (test_pairs.empty()) throw ValidationError("evaluate_model: no test pairs");
  const AssemblyConfig asm_cfg{cfg.label_input, cfg.truncate_right, model.cfg.max_len};

  std::map<std::string, std::string> instruction_of;
  EvalOutcome outcome;
  std::vector<double> model_scores, human_scores;
  for (const auto& p : test_pairs) {
    auto it = instruction_of.find(p.task);
    if (it == instruction_of.end()) {
      it = instruction_of.emplace(p.task, instruction_for(registry.get(p.task)).text).first;
    }
    const std::string& instr = it->second;
    const TokenSequence sg = assemble(instr, p.good, asm_cfg, vocab);
    const TokenSequence sb = assemble(instr, p.bad, asm_cfg, vocab);
    const double rg = score(model, sg.ids, sg.true_len);
    const double rb = score(model, sb.ids, sb.true_len);
    outcome.scored.push_back(ScoredPair{p.id, rg, rb});
    if (p.good.human_score) {
      model_scores.push_back(rg);
      human_scores.push_back(*p.good.human_score);
    }
    if (p.bad.human_score) {
      model_scores.push_back(rb);
      human_scores.push_back(*p.bad.human_score);
    }
  }
  outcome.accuracy = pairwise_accuracy(outcome.scored);
  outcome.tie_frac = tie_fraction(outcome.scored);
  if (model_scores.size() >= 3) {
    outcome.spearman_rho = spearman(model_scores, human_scores);
  }
  return outcome;
}

}  // namespace prefscore
