// bmtc: tensor completion benchmark front end.
//
// Subcommands:
//   complete  run one completion (bmnn or halrtc) and emit tensor + metrics
//   sweep     rerun one parameter axis over a value list, long-format CSV
//   synth     generate a synthetic low-BM-rank instance plus sampling mask
//
// Exit codes: 0 ok, 2 bad arguments, 3 I/O failure, 4 diverged.

#include <array>
#include <cmath>
#include <cstdint>
#include <cstdio>
#include <filesystem>
#include <fstream>
#include <limits>
#include <optional>
#include <stdexcept>
#include <string>
#include <vector>

#include "CLI11.hpp"
#include "json.hpp"

#include "bmtc/halrtc.hpp"
#include "bmtc/io.hpp"
#include "bmtc/kernels.hpp"
#include "bmtc/solver.hpp"
#include "bmtc/tensor.hpp"

namespace fs = std::filesystem;
using json = nlohmann::ordered_json;

namespace {

constexpr int kExitOk = 0;
constexpr int kExitBadArgs = 2;
constexpr int kExitIo = 3;
constexpr int kExitDiverged = 4;

std::string g17(double v) {
  if (std::isnan(v)) return "nan";
  char buf[40];
  std::snprintf(buf, sizeof buf, "%.17g", v);
  return buf;
}

std::string hex64(std::uint64_t v) {
  char buf[24];
  std::snprintf(buf, sizeof buf, "0x%016llx", static_cast<unsigned long long>(v));
  return buf;
}

void apply_kernels(const std::string& choice) {
  if (choice == "auto") return;
  bmtc::kernels::set_backend(choice == "avx2" ? bmtc::kernels::Backend::avx2
                                              : bmtc::kernels::Backend::scalar);
}

bmtc::Tensor3 load_input(const std::string& path) {
  if (fs::is_directory(path)) return bmtc::import_frames(path);
  return bmtc::read_tensor(path);
}

double max_abs(const bmtc::Tensor3& t) {
  double m = 0.0;
  for (std::size_t i = 0; i < t.size(); ++i)
    m = std::max(m, std::abs(t.data()[i]));
  return m;
}

void scale_inplace(bmtc::Tensor3& t, double s) {
  for (std::size_t i = 0; i < t.size(); ++i) t.data()[i] *= s;
}

void write_text(const std::string& path, const std::string& body) {
  std::ofstream out(path, std::ios::trunc);
  if (!out) throw std::runtime_error("cannot open " + path);
  out << body;
  out.flush();
  if (!out) throw std::runtime_error("write failed for " + path);
}

std::string csv_rows(const std::vector<bmtc::IterationRecord>& recs,
                     const std::string& prefix) {
  std::string body;
  for (const auto& r : recs) {
    if (!prefix.empty()) body += prefix;
    body += std::to_string(r.iter);
    body += ',' + g17(r.re) + ',' + g17(r.rel_change) + ',' + g17(r.fit_term) +
            ',' + g17(r.mu) + ',' + g17(r.seconds) + '\n';
  }
  return body;
}

json report_summary(const bmtc::SolverReport& rep) {
  json j;
  j["status"] = bmtc::to_string(rep.status);
  j["iterations"] = rep.records.size();
  if (!rep.records.empty()) {
    const auto& last = rep.records.back();
    j["final_re"] = std::isnan(last.re) ? json(nullptr) : json(last.re);
    j["final_rel_change"] = last.rel_change;
    j["final_fit_term"] = last.fit_term;
  }
  j["total_seconds"] = rep.total_seconds;
  return j;
}

// Shared flag set of complete and sweep.
struct RunOpts {
  std::string input, out, mask_file, gt_file;
  std::string solver = "bmnn";
  std::string kernels = "auto";
  double mask_rate = 0.0;
  bool have_mask_rate = false;
  std::uint64_t seed = 0;
  bool normalize = false;
  int threads = 1;

  std::size_t rank = 3;
  double lambda = 0.2;
  double mu0 = 0.01;
  double rho = 1.05;
  double mu_max = 1e10;
  std::vector<double> alphas{1.0 / 3.0, 1.0 / 3.0, 1.0 / 3.0};
  std::size_t max_iters = 500;
  double tol = 1e-4;
  std::size_t rals_sweeps = 1;

  double halrtc_rho = 1e-6;
  double halrtc_growth = 1.1;
};

void add_run_options(CLI::App& sub, RunOpts& o, bool sweep) {
  sub.add_option("--input", o.input, "tensor file or directory of .pgm frames")
      ->required();
  sub.add_option("--out", o.out, "output directory")->required();
  sub.add_option("--mask-rate", o.mask_rate,
                 "observation rate in [0,1], sampled with --seed");
  sub.add_option("--mask", o.mask_file, "mask file (flags bound to --input)");
  sub.add_option("--seed", o.seed, "seed for mask sampling and factor init");
  sub.add_option("--solver", o.solver)
      ->check(CLI::IsMember(sweep
                                ? std::vector<std::string>{"bmnn", "halrtc",
                                                           "both"}
                                : std::vector<std::string>{"bmnn", "halrtc"}));
  sub.add_option("--rank", o.rank, "BM-rank of the factor model");
  sub.add_option("--lambda", o.lambda, "fit weight");
  sub.add_option("--mu0", o.mu0, "initial penalty");
  sub.add_option("--rho", o.rho, "penalty growth factor");
  sub.add_option("--mu-max", o.mu_max, "penalty cap");
  sub.add_option("--alphas", o.alphas, "three nuclear-norm weights a1,a2,a3")
      ->delimiter(',');
  sub.add_option("--max-iters", o.max_iters);
  sub.add_option("--tol", o.tol, "stopping tolerance");
  sub.add_option("--rals-sweeps", o.rals_sweeps,
                 "inner factor passes per iteration");
  sub.add_option("--ground-truth", o.gt_file,
                 "reference tensor; enables the RE column and RE stopping");
  sub.add_flag("--normalize", o.normalize,
               "scale the input by 1/max|entry| for the solve");
  sub.add_option("--threads", o.threads, "worker count inside one run");
  sub.add_option("--kernels", o.kernels, "inner-loop backend")
      ->check(CLI::IsMember({"auto", "scalar", "avx2"}));
  sub.add_option("--halrtc-rho", o.halrtc_rho, "baseline penalty");
  sub.add_option("--halrtc-growth", o.halrtc_growth,
                 "baseline penalty growth per iteration (1 = constant)");
}

std::array<double, 3> alphas3(const std::vector<double>& a) {
  if (a.size() != 3)
    throw std::invalid_argument("--alphas needs exactly three values");
  return {a[0], a[1], a[2]};
}

bmtc::SolverConfig bmnn_config(const RunOpts& o) {
  bmtc::SolverConfig cfg;
  cfg.lambda = o.lambda;
  cfg.mu0 = o.mu0;
  cfg.rho = o.rho;
  cfg.mu_max = o.mu_max;
  cfg.alphas = alphas3(o.alphas);
  cfg.bm_rank = o.rank;
  cfg.max_iters = o.max_iters;
  cfg.tol = o.tol;
  cfg.rals_sweeps = o.rals_sweeps;
  cfg.seed = o.seed;
  cfg.threads = o.threads;
  return cfg;
}

bmtc::HalrtcConfig halrtc_config(const RunOpts& o) {
  bmtc::HalrtcConfig cfg;
  cfg.rho_penalty = o.halrtc_rho;
  cfg.rho_growth = o.halrtc_growth;
  cfg.alphas = alphas3(o.alphas);
  cfg.max_iters = o.max_iters;
  cfg.tol = o.tol;
  cfg.threads = o.threads;
  return cfg;
}

json config_json(const RunOpts& o, const std::string& solver, double scale) {
  json j;
  j["solver"] = solver;
  if (solver == "bmnn") {
    j["lambda"] = o.lambda;
    j["mu0"] = o.mu0;
    j["rho"] = o.rho;
    j["mu_max"] = o.mu_max;
    j["rank"] = o.rank;
    j["rals_sweeps"] = o.rals_sweeps;
  } else {
    j["halrtc_rho"] = o.halrtc_rho;
    j["halrtc_growth"] = o.halrtc_growth;
  }
  j["alphas"] = o.alphas;
  j["max_iters"] = o.max_iters;
  j["tol"] = o.tol;
  j["seed"] = o.seed;
  j["threads"] = o.threads;
  j["kernels"] = bmtc::kernels::backend_name(bmtc::kernels::active_backend());
  j["normalize"] = o.normalize;
  j["scale"] = scale;
  return j;
}

json argv_json(int argc, char** argv) {
  json a = json::array();
  for (int i = 0; i < argc; ++i) a.push_back(argv[i]);
  return a;
}

// Loaded problem: data tensor (possibly normalized), optional ground truth
// in the same units, and the normalization factor applied.
struct Problem {
  bmtc::Tensor3 data;
  std::optional<bmtc::Tensor3> gt;
  double scale = 1.0;  // data = raw input * (1/scale)
};

Problem load_problem(const RunOpts& o) {
  Problem p;
  p.data = load_input(o.input);
  if (o.normalize) {
    const double m = max_abs(p.data);
    if (m > 0.0) {
      p.scale = m;
      scale_inplace(p.data, 1.0 / m);
    }
  }
  if (!o.gt_file.empty()) {
    bmtc::Tensor3 gt = bmtc::read_tensor(o.gt_file);
    if (!(gt.dims() == p.data.dims()))
      throw std::invalid_argument("--ground-truth dims do not match the input");
    if (p.scale != 1.0) scale_inplace(gt, 1.0 / p.scale);
    p.gt = std::move(gt);
  }
  return p;
}

bmtc::ObservationMask make_mask(const RunOpts& o, const bmtc::Tensor3& data,
                                double rate) {
  if (!o.mask_file.empty()) {
    bmtc::MaskData md = bmtc::read_mask(o.mask_file);
    if (!(md.dims == data.dims()))
      throw std::invalid_argument("--mask dims do not match the input");
    return bmtc::ObservationMask::from_tensor(data, std::move(md.flags));
  }
  return bmtc::gen_mask({rate, o.seed, data.dims()}, data);
}

void require_one_mask_source(const RunOpts& o) {
  if (o.have_mask_rate == !o.mask_file.empty())
    throw std::invalid_argument("give exactly one of --mask-rate or --mask");
}

json input_json(const RunOpts& o) {
  json j;
  j["input"] = {{"path", o.input},
                {"fnv1a64", fs::is_directory(o.input)
                                ? json(nullptr)
                                : json(hex64(bmtc::hash_file(o.input)))}};
  if (!o.mask_file.empty())
    j["mask"] = {{"path", o.mask_file},
                 {"fnv1a64", hex64(bmtc::hash_file(o.mask_file))}};
  else
    j["mask"] = {{"rate", o.mask_rate}, {"seed", o.seed}};
  if (!o.gt_file.empty())
    j["ground_truth"] = {{"path", o.gt_file},
                         {"fnv1a64", hex64(bmtc::hash_file(o.gt_file))}};
  return j;
}

int run_complete(const RunOpts& o, int argc, char** argv) {
  require_one_mask_source(o);
  apply_kernels(o.kernels);
  Problem p = load_problem(o);
  bmtc::ObservationMask mask = make_mask(o, p.data, o.mask_rate);
  fs::create_directories(o.out);

  const bmtc::Tensor3* gt = p.gt ? &*p.gt : nullptr;
  bmtc::Tensor3 completed;
  bmtc::SolverReport report;
  if (o.solver == "bmnn") {
    bmtc::RunResult rr = bmtc::run(mask, bmnn_config(o), gt);
    completed = std::move(rr.x);
    report = std::move(rr.report);
  } else {
    bmtc::HalrtcResult hr = bmtc::halrtc_run(mask, halrtc_config(o), gt);
    completed = std::move(hr.x);
    report = std::move(hr.report);
  }
  if (p.scale != 1.0) scale_inplace(completed, p.scale);

  const std::string tensor_path = (fs::path(o.out) / "completed.bmt").string();
  const std::string csv_path = (fs::path(o.out) / "iterations.csv").string();
  bmtc::write_tensor(tensor_path, completed);
  write_text(csv_path, "iter,re_or_nan,rel_change,fit_term,mu,seconds\n" +
                           csv_rows(report.records, ""));

  json manifest;
  manifest["command"] = "complete";
  manifest["argv"] = argv_json(argc, argv);
  manifest["config"] = config_json(o, o.solver, p.scale);
  manifest["inputs"] = input_json(o);
  manifest["outputs"] = {
      {"tensor", tensor_path},
      {"iterations_csv", csv_path},
      {"dims", {completed.n1(), completed.n2(), completed.n3()}}};
  manifest["result"] = report_summary(report);
  write_text((fs::path(o.out) / "manifest.json").string(),
             manifest.dump(2) + "\n");

  return report.status == bmtc::SolverStatus::diverged ? kExitDiverged
                                                       : kExitOk;
}

int run_sweep(const RunOpts& o, const std::string& axis,
              const std::vector<double>& values, int argc, char** argv) {
  if (values.empty())
    throw std::invalid_argument("sweep: --values must not be empty");
  if (axis != "sample_rate" && o.solver != "bmnn")
    throw std::invalid_argument("sweep: axis " + axis + " applies to --solver bmnn only");
  if (axis == "sample_rate" && !o.mask_file.empty())
    throw std::invalid_argument("sweep: a sample_rate sweep generates its own masks");
  if (axis != "sample_rate") require_one_mask_source(o);
  apply_kernels(o.kernels);

  Problem p = load_problem(o);
  const bmtc::Tensor3* gt = p.gt ? &*p.gt : nullptr;
  std::vector<std::string> solvers;
  if (o.solver == "both")
    solvers = {"bmnn", "halrtc"};
  else
    solvers = {o.solver};

  std::string rows;
  json summary = json::array();
  std::string summary_csv =
      "axis,value,solver,status,iterations,final_re,total_seconds\n";
  bool any_diverged = false;

  for (const double value : values) {
    RunOpts ro = o;
    if (axis == "lambda") ro.lambda = value;
    else if (axis == "mu0") ro.mu0 = value;
    else if (axis == "rho") ro.rho = value;
    bmtc::ObservationMask mask =
        make_mask(ro, p.data, axis == "sample_rate" ? value : o.mask_rate);

    for (const std::string& solver : solvers) {
      bmtc::SolverReport report;
      if (solver == "bmnn") {
        report = bmtc::run(mask, bmnn_config(ro), gt).report;
      } else {
        report = bmtc::halrtc_run(mask, halrtc_config(ro), gt).report;
      }
      any_diverged |= report.status == bmtc::SolverStatus::diverged;

      const std::string prefix = axis + ',' + g17(value) + ',' + solver + ',';
      rows += csv_rows(report.records, prefix);
      const double final_re =
          report.records.empty() ? std::numeric_limits<double>::quiet_NaN()
                                 : report.records.back().re;
      summary_csv += prefix + bmtc::to_string(report.status) + ',' +
                     std::to_string(report.records.size()) + ',' +
                     g17(final_re) + ',' + g17(report.total_seconds) + '\n';
      json s = report_summary(report);
      s["axis"] = axis;
      s["value"] = value;
      s["solver"] = solver;
      summary.push_back(std::move(s));
    }
  }

  fs::create_directories(o.out);
  const std::string sweep_path = (fs::path(o.out) / "sweep.csv").string();
  const std::string summary_path = (fs::path(o.out) / "summary.csv").string();
  write_text(sweep_path,
             "axis,value,solver,iter,re_or_nan,rel_change,fit_term,mu,seconds\n" +
                 rows);
  write_text(summary_path, summary_csv);

  json manifest;
  manifest["command"] = "sweep";
  manifest["argv"] = argv_json(argc, argv);
  manifest["axis"] = axis;
  manifest["values"] = values;
  manifest["config"] = config_json(o, o.solver, p.scale);
  manifest["inputs"] = input_json(o);
  manifest["outputs"] = {{"sweep_csv", sweep_path},
                         {"summary_csv", summary_path}};
  manifest["runs"] = std::move(summary);
  write_text((fs::path(o.out) / "manifest.json").string(),
             manifest.dump(2) + "\n");

  return any_diverged ? kExitDiverged : kExitOk;
}

int run_synth(const std::vector<std::uint64_t>& dims, std::size_t rank,
              std::size_t slice_rank, double rate, std::uint64_t seed,
              const std::string& out, int argc, char** argv) {
  if (dims.size() != 3)
    throw std::invalid_argument("synth: --dims needs exactly three values");
  const bmtc::Dims d{static_cast<std::size_t>(dims[0]),
                     static_cast<std::size_t>(dims[1]),
                     static_cast<std::size_t>(dims[2])};
  bmtc::SyntheticInstance inst = bmtc::gen_synthetic(d, rank, slice_rank, seed);
  bmtc::ObservationMask mask = bmtc::gen_mask({rate, seed, d}, inst.x);

  fs::create_directories(out);
  const std::string gt_path = (fs::path(out) / "ground_truth.bmt").string();
  const std::string mask_path = (fs::path(out) / "mask.bmm").string();
  bmtc::write_tensor(gt_path, inst.x);
  bmtc::write_mask(mask_path, d, mask.flags());

  json manifest;
  manifest["command"] = "synth";
  manifest["argv"] = argv_json(argc, argv);
  manifest["dims"] = {d.n1, d.n2, d.n3};
  manifest["rank"] = rank;
  manifest["slice_rank"] = slice_rank;
  manifest["rate"] = rate;
  manifest["seed"] = seed;
  manifest["observed_count"] = mask.observed_count();
  manifest["outputs"] = {
      {"ground_truth",
       {{"path", gt_path}, {"fnv1a64", hex64(bmtc::hash_file(gt_path))}}},
      {"mask",
       {{"path", mask_path}, {"fnv1a64", hex64(bmtc::hash_file(mask_path))}}}};
  write_text((fs::path(out) / "manifest.json").string(),
             manifest.dump(2) + "\n");
  return kExitOk;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"BM-factor tensor completion benchmarks"};
  app.require_subcommand(1);

  RunOpts copts;
  CLI::App* complete = app.add_subcommand("complete", "run one completion");
  add_run_options(*complete, copts, false);

  RunOpts sopts;
  std::string axis;
  std::vector<double> values;
  CLI::App* sweep =
      app.add_subcommand("sweep", "rerun one parameter axis over a value list");
  add_run_options(*sweep, sopts, true);
  sweep->add_option("--axis", axis)
      ->required()
      ->check(CLI::IsMember({"lambda", "mu0", "rho", "sample_rate"}));
  sweep->add_option("--values", values)->required()->delimiter(',');

  std::vector<std::uint64_t> dims;
  std::size_t rank = 3, slice_rank = 2;
  double rate = 0.3;
  std::uint64_t seed = 0;
  std::string out;
  CLI::App* synth =
      app.add_subcommand("synth", "generate a synthetic instance and mask");
  synth->add_option("--dims", dims, "n1,n2,n3")->required()->delimiter(',');
  synth->add_option("--rank", rank, "BM-rank of the generated factors");
  synth->add_option("--slice-rank", slice_rank,
                    "matrix rank of the a1/a3 slices");
  synth->add_option("--rate", rate, "observation rate in [0,1]");
  synth->add_option("--seed", seed);
  synth->add_option("--out", out, "output directory")->required();

  try {
    app.parse(argc, argv);
  } catch (const CLI::ParseError& e) {
    const int code = app.exit(e);
    return code == 0 ? 0 : kExitBadArgs;
  }
  copts.have_mask_rate = complete->count("--mask-rate") > 0;
  sopts.have_mask_rate = sweep->count("--mask-rate") > 0;

  try {
    if (complete->parsed()) return run_complete(copts, argc, argv);
    if (sweep->parsed()) return run_sweep(sopts, axis, values, argc, argv);
    return run_synth(dims, rank, slice_rank, rate, seed, out, argc, argv);
  } catch (const std::logic_error& e) {
    std::fprintf(stderr, "bmtc: %s\n", e.what());
    return kExitBadArgs;
  } catch (const std::exception& e) {
    std::fprintf(stderr, "bmtc: %s\n", e.what());
    return kExitIo;
  }
}
