#include "cli.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <filesystem>
#include <ostream>
#include <sstream>

#include <CLI11.hpp>
#include <json.hpp>

#include "sbart/cvtune.hpp"
#include "sbart/error.hpp"
#include "sbart/interaction.hpp"
#include "sbart/io.hpp"
#include "sbart/metrics.hpp"
#include "sbart/preprocess.hpp"
#include "sbart/rng.hpp"
#include "sbart/sampler.hpp"
#include "sbart/varselect.hpp"

namespace fs = std::filesystem;

namespace sbart {
namespace {

struct Options {
  std::string data, label_col, adulteration_col, config, out = ".", model, method = "usage", kind = "multinomial";
  std::string name = "BART";
  std::vector<std::string> ignore;
  std::uint64_t seed = 0;
  bool seed_set = false, sparse = false, smote = false, standardize = false, snv = false;
  std::size_t top = 3, components = 2, trees = 0, ndpost = 0, nskip = 0;
  int stage = 1, folds = 0;
  double threshold = kDefaultEdgeThreshold, test_frac = -1.0;
};

std::string num(double v, int digits = 10) {
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.*g", digits, v);
  return buf;
}

RunConfig run_config(const Options& o) {
  RunConfig rc;
  if (!o.config.empty()) rc = load_config(o.config);
  if (o.seed_set) {
    rc.bart.seed = o.seed;
    rc.grid.seed = o.seed;
  }
  if (o.sparse) rc.bart.sparse = true;
  if (o.trees) rc.bart.num_trees = o.trees;
  if (o.ndpost) rc.bart.ndpost = o.ndpost;
  if (o.nskip) rc.bart.nskip = o.nskip;
  if (o.smote) rc.pipeline.smote = true;
  if (o.folds) {
    rc.pipeline.folds = o.folds;
    rc.grid.folds = o.folds;
  }
  if (o.test_frac >= 0.0) rc.pipeline.test_frac = o.test_frac;
  rc.bart.validate();
  rc.grid.base_config = rc.bart;
  return rc;
}

Dataset load_data(const Options& o, bool need_labels) {
  if (o.data.empty()) throw UsageError("--data is required");
  Dataset d = load_csv(o.data, {o.label_col, o.adulteration_col, o.ignore});
  if (need_labels && !d.labelled()) throw UsageError("--label-col or --adulteration-col is required");
  return d;
}

// Labels as the model numbers them. Text labels are looked up in the
// model's class list.
std::vector<int> model_labels(const Dataset& d, const ModelArtifact& m) {
  if (m.class_names.empty() || d.class_names.empty()) {
    if (d.y.empty()) throw DataError("label column '" + d.label_name + "' is not integer-valued");
    return d.y;
  }
  std::vector<int> out;
  for (int v : d.y) {
    const std::string& name = d.class_names[static_cast<std::size_t>(v - 1)];
    const auto it = std::find(m.class_names.begin(), m.class_names.end(), name);
    if (it == m.class_names.end()) throw DataError("class '" + name + "' is unknown to the model");
    out.push_back(1 + static_cast<int>(it - m.class_names.begin()));
  }
  return out;
}

// Predictor columns of d reordered to the model's variable list.
Matrix model_inputs(const Dataset& d, const ModelArtifact& m) {
  std::vector<std::size_t> cols;
  for (const auto& name : m.variables) cols.push_back(d.var_index(name));
  return d.X.select_cols(cols);
}

std::vector<int> binary_labels(std::span<const int> y) {
  if (y.empty()) throw DataError("no labels");
  const int lo = *std::min_element(y.begin(), y.end());
  std::vector<int> out;
  for (int v : y) {
    if (v - lo > 1) throw DataError("binary model needs exactly two adjacent label values");
    out.push_back(v - lo);
  }
  return out;
}

std::vector<std::size_t> random_split(std::size_t n, double frac, std::uint64_t seed) {
  std::vector<std::size_t> idx(n);
  for (std::size_t i = 0; i < n; ++i) idx[i] = i;
  Rng rng(Rng::derive(seed, "random-split"));
  for (std::size_t k = n; k > 1; --k) std::swap(idx[k - 1], idx[rng.below(k)]);
  idx.resize(static_cast<std::size_t>(std::llround(frac * static_cast<double>(n))));
  std::sort(idx.begin(), idx.end());
  return idx;
}

std::vector<std::size_t> complement(std::size_t n, const std::vector<std::size_t>& rows) {
  std::vector<bool> in(n, false);
  for (std::size_t r : rows) in[r] = true;
  std::vector<std::size_t> out;
  for (std::size_t i = 0; i < n; ++i)
    if (!in[i]) out.push_back(i);
  return out;
}

void write_text(const fs::path& path, const std::string& s) {
  write_atomic(path, [&](std::ostream& os) { os << s; });
}

// Predictions, confusion matrix and metrics for labelled rows.
void evaluate(const ModelArtifact& m, const Matrix& X, std::span<const int> labels, const fs::path& dir,
              const std::string& name, std::ostream& out, bool summary_table) {
  std::ostringstream pred;
  nlohmann::ordered_json summary;
  if (const auto* reg = std::get_if<RegressionDraws>(&m.draws)) {
    const auto mean = predict_regression(*reg, X);
    pred << "row,prediction\n";
    for (std::size_t i = 0; i < mean.size(); ++i) pred << i << ',' << num(mean[i], 17) << '\n';
    write_text(dir / "predictions.csv", pred.str());
    return;
  }
  ClassProbs probs;
  if (const auto* c = std::get_if<ClassifierDraws>(&m.draws)) {
    probs = predict_class_probs(*c, X);
  } else {
    const auto p1 = predict_binary(std::get<BinaryDraws>(m.draws), X);
    probs.probs = Matrix(p1.size(), 2);
    for (std::size_t i = 0; i < p1.size(); ++i) {
      probs.probs(i, 0) = 1.0 - p1[i];
      probs.probs(i, 1) = p1[i];
    }
  }
  const auto predicted = predict_labels(probs);
  pred << "row,predicted";
  for (std::size_t c = 1; c <= probs.classes(); ++c) pred << ",p" << c;
  pred << '\n';
  for (std::size_t i = 0; i < probs.rows(); ++i) {
    pred << i << ',' << predicted[i];
    for (std::size_t c = 0; c < probs.classes(); ++c) pred << ',' << num(probs.probs(i, c));
    pred << '\n';
  }
  write_text(dir / "predictions.csv", pred.str());
  if (labels.empty()) return;

  const int K = static_cast<int>(probs.classes());
  EvalReport r = multiclass_report(confusion(labels, predicted, K));
  r.log_loss = log_loss(probs, labels);
  write_atomic(dir / "metrics.json", [&](std::ostream& os) { write_report_json(os, r, name); });
  std::ostringstream cm;
  cm << "actual";
  for (int p = 1; p <= K; ++p) cm << ",pred_" << p;
  cm << '\n';
  for (int a = 1; a <= K; ++a) {
    cm << a;
    for (int p = 1; p <= K; ++p) cm << ',' << r.confusion.at(a, p);
    cm << '\n';
  }
  write_text(dir / "confusion.csv", cm.str());
  if (summary_table) {
    const std::vector<std::pair<std::string, EvalReport>> rows{{name, r}};
    write_atomic(dir / "summary.csv", [&](std::ostream& os) { write_summary_csv(os, rows); });
  }
  out << "accuracy " << num(r.overall_accuracy, 6) << "  macro MCC " << num(r.macro.mcc, 6) << "  log-loss "
      << num(*r.log_loss, 6) << " on " << labels.size() << " rows\n";
}

int cmd_train(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig rc = run_config(o);
  const Dataset d = load_data(o, true);
  out << "data " << d.source << ": " << d.rows() << " rows, " << d.cols() << " predictors, checksum "
      << d.checksum << '\n';

  ModelArtifact m;
  m.variables = d.names;
  m.label_name = d.label_name;
  m.class_names = d.class_names;
  std::vector<std::size_t> test;
  const std::uint64_t seed = rc.bart.seed;
  const fs::path dir = o.out;

  if (o.kind == "regression") {
    if (d.response.empty()) throw DataError("label column '" + d.label_name + "' is not numeric");
    test = random_split(d.rows(), rc.pipeline.test_frac, seed);
    const auto train = complement(d.rows(), test);
    std::vector<double> y;
    for (std::size_t r : train) y.push_back(d.response[r]);
    err << "fitting regression on " << train.size() << " rows\n";
    m.draws = fit_regression(d.X.select_rows(train), y, rc.bart);
  } else if (o.kind == "binary" || o.kind == "multinomial") {
    if (d.y.empty()) throw DataError("label column '" + d.label_name + "' is not integer-valued");
    for (const auto& [label, count] : d.histogram()) out << "class " << label << ": " << count << '\n';
    const SplitPlan plan = stratified_split(d.y, rc.pipeline.test_frac, rc.pipeline.folds, seed);
    test = plan.test;
    TrainingFold tr = training_fold(d.X, d.y, plan.calibration);
    if (rc.pipeline.smote) tr = smote(tr, rc.pipeline.smote_k, {}, seed);
    err << "fitting " << o.kind << " model on " << tr.y.size() << " rows\n";
    if (o.kind == "binary")
      m.draws = fit_probit_binary(tr.X, binary_labels(tr.y), rc.bart);
    else
      m.draws = fit_multinomial(tr.X, tr.y, rc.bart);
  } else {
    throw UsageError("--kind must be regression, binary or multinomial");
  }

  save_model(dir / "model.json", m);
  {
    std::ostringstream s;
    s << "row,set\n";
    std::vector<bool> is_test(d.rows(), false);
    for (std::size_t r : test) is_test[r] = true;
    for (std::size_t i = 0; i < d.rows(); ++i) s << i << ',' << (is_test[i] ? "test" : "train") << '\n';
    write_text(dir / "split.csv", s.str());
  }
  if (!test.empty()) {
    const Dataset held = d.select_rows(test);
    save_csv(dir / "test.csv", held);
    std::vector<int> labels;
    if (m.kind() == ModelKind::multinomial) labels = held.y;
    if (m.kind() == ModelKind::binary) {
      labels = binary_labels(d.y);
      std::vector<int> sel;
      for (std::size_t r : test) sel.push_back(labels[r] + 1);
      labels = sel;
    }
    evaluate(m, held.X, labels, dir, o.name, out, false);
  }
  out << "model written to " << (dir / "model.json").string() << '\n';
  return 0;
}

int cmd_predict(const Options& o, std::ostream& out, std::ostream&) {
  if (o.model.empty()) throw UsageError("--model is required");
  const ModelArtifact m = load_model(o.model);
  const Dataset d = load_data(o, false);
  const Matrix X = model_inputs(d, m);
  std::vector<int> labels;
  if (d.labelled() && m.kind() != ModelKind::regression) {
    labels = model_labels(d, m);
    if (m.kind() == ModelKind::binary) {
      labels = binary_labels(labels);
      for (int& v : labels) ++v;
    }
  }
  evaluate(m, X, labels, o.out, o.name, out, false);
  return 0;
}

int cmd_cv(const Options& o, std::ostream& out, std::ostream& err) {
  const RunConfig rc = run_config(o);
  const Dataset d = load_data(o, true);
  if (d.y.empty()) throw DataError("label column '" + d.label_name + "' is not integer-valued");
  const SplitPlan plan = stratified_split(d.y, rc.pipeline.test_frac, rc.pipeline.folds, rc.bart.seed);
  const TrainingFold cal = training_fold(d.X, d.y, plan.calibration);
  Grid grid = rc.grid;
  grid.folds = rc.pipeline.folds;
  err << "grid search over " << grid.num_cells() << " cells x " << grid.folds << " folds\n";
  const TuneResult r = grid_search(cal.X, cal.y, grid);
  const fs::path dir = o.out;
  write_atomic(dir / "tune.csv", [&](std::ostream& os) { write_tune_csv(os, r); });
  write_atomic(dir / "tune.json", [&](std::ostream& os) { write_tune_json(os, r); });
  RunConfig best = rc;
  best.bart = r.best().config;
  best.bart.seed = rc.bart.seed;
  write_atomic(dir / "best_config.json", [&](std::ostream& os) { write_config_json(os, best); });
  const BartConfig& w = r.best().config;
  out << "best: m=" << w.num_trees << " k=" << num(w.k) << " power=" << num(w.power) << " base=" << num(w.base)
      << " mean log-loss " << num(r.best().mean_loss, 6) << '\n';
  return 0;
}

int cmd_select(const Options& o, std::ostream& out, std::ostream&) {
  if (o.model.empty()) throw UsageError("--model is required");
  const ModelArtifact m = load_model(o.model);
  const fs::path dir = o.out;
  std::vector<std::size_t> vars;
  double cumulative = std::nan("");
  if (o.method == "usage") {
    const UsageSummary us = usage_frequencies(m.varcount());
    const TopSelection top = select_top(us, o.top);
    vars = top.vars;
    cumulative = top.cumulative;
    write_atomic(dir / "usage.csv", [&](std::ostream& os) { write_usage_csv(os, us, m.variables); });
    out << "top " << vars.size() << " by usage (cumulative " << num(cumulative, 4) << "):";
  } else if (o.method == "sparse") {
    SparseSummary s;
    if (const auto* c = std::get_if<ClassifierDraws>(&m.draws)) {
      if (!c->config.sparse) throw UsageError("--method sparse needs a model trained with --sparse");
      s = sparse_selection(*c);
    } else {
      const ChainDraws& ch = m.kind() == ModelKind::regression ? std::get<RegressionDraws>(m.draws).chain
                                                                : std::get<BinaryDraws>(m.draws).chain;
      if (ch.varprob.rows() == 0) throw UsageError("--method sparse needs a model trained with --sparse");
      s.stages.push_back(stage_selection(ch.varprob, 1));
    }
    if (o.stage < 1 || o.stage > static_cast<int>(s.stages.size()))
      throw UsageError("--stage must lie in 1.." + std::to_string(s.stages.size()));
    const StageSelection& st = s.stages[static_cast<std::size_t>(o.stage - 1)];
    vars = st.selected;
    write_atomic(dir / "sparse.csv", [&](std::ostream& os) { write_sparse_csv(os, s, m.variables); });
    out << vars.size() << " variables above 1/p for stage " << o.stage;
    if (st.conditional_small_support) out << " (conditional stage, small support)";
    out << ':';
  } else {
    throw UsageError("--method must be usage or sparse");
  }
  for (std::size_t v : vars) out << ' ' << m.variables[v];
  out << '\n';
  if (vars.empty()) throw NumericError("selection is empty");
  write_atomic(dir / "selection.json",
               [&](std::ostream& os) { write_selection_json(os, o.method, vars, m.variables, cumulative); });
  std::ostringstream s;
  s << "rank,variable,index\n";
  for (std::size_t r = 0; r < vars.size(); ++r) s << r + 1 << ',' << m.variables[vars[r]] << ',' << vars[r] << '\n';
  write_text(dir / "selection.csv", s.str());
  if (!o.data.empty()) {
    const Dataset d = load_data(o, false);
    std::vector<std::size_t> cols;
    for (std::size_t v : vars) cols.push_back(d.var_index(m.variables[v]));
    save_csv(dir / "reduced.csv", d.select_vars(cols));
  }
  return 0;
}

std::vector<Ensemble> pooled_draws(const ModelArtifact& m) {
  if (const auto* r = std::get_if<RegressionDraws>(&m.draws)) return r->chain.ensembles;
  if (const auto* b = std::get_if<BinaryDraws>(&m.draws)) return b->chain.ensembles;
  std::vector<Ensemble> all;
  for (const BinaryDraws& s : std::get<ClassifierDraws>(m.draws).stages)
    all.insert(all.end(), s.chain.ensembles.begin(), s.chain.ensembles.end());
  return all;
}

int cmd_interact(const Options& o, std::ostream& out, std::ostream&) {
  if (o.model.empty()) throw UsageError("--model is required");
  const ModelArtifact m = load_model(o.model);
  const auto draws = pooled_draws(m);
  const InteractionMatrix im = co_occurrence(draws, m.grid());
  const InteractionNetwork net = build_network(im, o.threshold, m.variables);
  const fs::path dir = o.out;
  write_atomic(dir / "interactions.csv", [&](std::ostream& os) { write_matrix_csv(os, im, m.variables); });
  write_atomic(dir / "network.dot", [&](std::ostream& os) { write_network_dot(os, net); });
  write_atomic(dir / "network.json", [&](std::ostream& os) { write_network_json(os, net); });
  out << im.total_pairs << " parent-child split pairs, " << net.edges.size() << " edges at threshold "
      << num(o.threshold) << '\n';
  return 0;
}

int cmd_pca(const Options& o, std::ostream& out, std::ostream&) {
  Dataset d = load_data(o, false);
  if (o.snv) d.X = snv_rows(d.X);
  const PcaModel pca = fit_pca(d.X, o.standardize);
  const std::size_t q = std::min(o.components, pca.num_vars());
  const fs::path dir = o.out;
  std::ostringstream ex;
  ex << "component,variance,explained,cumulative\n";
  double cum = 0.0;
  for (std::size_t c = 0; c < pca.variances.size(); ++c) {
    cum += pca.explained[c];
    ex << "PC" << c + 1 << ',' << num(pca.variances[c]) << ',' << num(pca.explained[c]) << ',' << num(cum) << '\n';
  }
  write_text(dir / "explained.csv", ex.str());
  std::ostringstream ld;
  ld << "variable";
  for (std::size_t c = 0; c < q; ++c) ld << ",PC" << c + 1;
  ld << '\n';
  for (std::size_t j = 0; j < pca.num_vars(); ++j) {
    ld << d.names[j];
    for (std::size_t c = 0; c < q; ++c) ld << ',' << num(pca.loadings(j, c));
    ld << '\n';
  }
  write_text(dir / "loadings.csv", ld.str());
  Dataset scores = d;
  scores.X = transform_pca(pca, d.X, q);
  scores.names.clear();
  for (std::size_t c = 0; c < q; ++c) scores.names.push_back("PC" + std::to_string(c + 1));
  save_csv(dir / "scores.csv", scores);
  out << "explained variance:";
  for (std::size_t c = 0; c < std::min<std::size_t>(3, pca.explained.size()); ++c)
    out << " PC" << c + 1 << ' ' << num(100.0 * pca.explained[c], 4) << '%';
  out << '\n';
  return 0;
}

int cmd_report(const Options& o, std::ostream& out, std::ostream&) {
  if (o.model.empty()) throw UsageError("--model is required");
  const ModelArtifact m = load_model(o.model);
  const Dataset d = load_data(o, true);
  if (m.kind() != ModelKind::multinomial) throw UsageError("report needs a multinomial model");
  const fs::path dir = o.out;
  evaluate(m, model_inputs(d, m), model_labels(d, m), dir, o.name, out, true);
  const UsageSummary us = usage_frequencies(m.varcount());
  write_atomic(dir / "top_usage.csv", [&](std::ostream& os) { write_usage_csv(os, us, m.variables, 5); });
  return 0;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Bayesian additive regression trees for spectral classification", "sbart"};
  app.require_subcommand(1);
  Options o;

  auto data_opts = [&](CLI::App* c, bool labels) {
    c->add_option("--data", o.data, "CSV file with a header row")->required();
    if (labels) {
      auto* lc = c->add_option("--label-col", o.label_col, "column holding class labels");
      auto* ac = c->add_option("--adulteration-col", o.adulteration_col, "column holding adulteration %");
      lc->excludes(ac);
    }
    c->add_option("--ignore-col", o.ignore, "non-numeric column to drop (repeatable)");
  };
  auto seed_opt = [&](CLI::App* c) {
    c->add_option_function<std::uint64_t>(
        "--seed", [&](const std::uint64_t& s) { o.seed = s, o.seed_set = true; }, "master seed");
  };
  auto run_opts = [&](CLI::App* c) {
    c->add_option("--config", o.config, "JSON run configuration");
    seed_opt(c);
    c->add_flag("--sparse", o.sparse, "Dirichlet sparse prior on split variables");
    c->add_option("--test-frac", o.test_frac, "held-out fraction")->check(CLI::Range(0.0, 0.999));
    c->add_option("--folds", o.folds, "cross-validation folds")->check(CLI::Range(2, 1000));
    c->add_option("--trees", o.trees, "number of trees")->check(CLI::PositiveNumber);
    c->add_option("--ndpost", o.ndpost, "retained draws")->check(CLI::PositiveNumber);
    c->add_option("--nskip", o.nskip, "burn-in sweeps")->check(CLI::PositiveNumber);
  };

  auto* train = app.add_subcommand("train", "fit a model on the calibration rows and score the test rows");
  data_opts(train, true);
  run_opts(train);
  train->add_option("--out", o.out, "output directory");
  train->add_option("--kind", o.kind, "multinomial, binary or regression");
  train->add_flag("--smote", o.smote, "oversample minority classes in the training rows");
  train->add_option("--name", o.name, "model name in reports");

  auto* predict = app.add_subcommand("predict", "apply a saved model to a CSV file");
  data_opts(predict, true);
  predict->add_option("--model", o.model, "model JSON")->required();
  predict->add_option("--out", o.out, "output directory");
  predict->add_option("--name", o.name, "model name in reports");

  auto* cv = app.add_subcommand("cv", "grid search with stratified k-fold cross-validation");
  data_opts(cv, true);
  run_opts(cv);
  cv->add_option("--out", o.out, "output directory");

  auto* select = app.add_subcommand("select", "choose variables by split usage or sparse selection probability");
  select->add_option("--model", o.model, "model JSON")->required();
  select->add_option("--data", o.data, "dataset to reduce to the selected columns");
  select->add_option("--label-col", o.label_col, "label column kept in the reduced dataset");
  select->add_option("--adulteration-col", o.adulteration_col, "adulteration column (aggregated)");
  select->add_option("--ignore-col", o.ignore, "non-numeric column to drop (repeatable)");
  select->add_option("--method", o.method, "usage or sparse");
  select->add_option("--top", o.top, "number of variables for --method usage")->check(CLI::PositiveNumber);
  select->add_option("--stage", o.stage, "probit stage for --method sparse")->check(CLI::PositiveNumber);
  select->add_option("--out", o.out, "output directory");

  auto* interact = app.add_subcommand("interact", "parent-child split co-occurrence network");
  interact->add_option("--model", o.model, "model JSON")->required();
  interact->add_option("--threshold", o.threshold, "minimum edge weight")->check(CLI::Range(0.0, 1.0));
  interact->add_option("--out", o.out, "output directory");

  auto* pca = app.add_subcommand("pca", "principal component scores and explained variance");
  data_opts(pca, true);
  pca->add_option("--components", o.components, "components kept in scores.csv")->check(CLI::PositiveNumber);
  pca->add_flag("--standardize", o.standardize, "use the correlation matrix");
  pca->add_flag("--snv", o.snv, "apply SNV to each row first");
  pca->add_option("--out", o.out, "output directory");

  auto* report = app.add_subcommand("report", "metrics table, confusion matrix and usage table for a test set");
  data_opts(report, true);
  report->add_option("--model", o.model, "model JSON")->required();
  report->add_option("--name", o.name, "model name in reports");
  report->add_option("--out", o.out, "output directory");

  std::vector<std::string> rev(args.rbegin(), args.rend());
  try {
    app.parse(rev);
  } catch (const CLI::CallForHelp&) {
    out << app.help();
    return 0;
  } catch (const CLI::ParseError& e) {
    err << "usage error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::usage);
  }

  try {
    if (*train) return cmd_train(o, out, err);
    if (*predict) return cmd_predict(o, out, err);
    if (*cv) return cmd_cv(o, out, err);
    if (*select) return cmd_select(o, out, err);
    if (*interact) return cmd_interact(o, out, err);
    if (*pca) return cmd_pca(o, out, err);
    if (*report) return cmd_report(o, out, err);
  } catch (const Error& e) {
    const char* kind = e.code() == ExitCode::usage ? "usage" : e.code() == ExitCode::data ? "data" : "numeric";
    err << kind << " error: " << e.what() << '\n';
    return exit_code(e);
  } catch (const fs::filesystem_error& e) {
    err << "data error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::data);
  } catch (const std::exception& e) {
    err << "numeric error: " << e.what() << '\n';
    return static_cast<int>(ExitCode::numeric);
  }
  return static_cast<int>(ExitCode::usage);
}

}  // namespace sbart
