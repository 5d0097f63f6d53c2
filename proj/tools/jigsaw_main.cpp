#include <cstdio>
#include <filesystem>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "jigsaw/csvio.hpp"
#include "jigsaw/errors.hpp"
#include "jigsaw/oracle/oracle.hpp"
#include "jigsaw/rng.hpp"
#include "jigsaw/sched/validate.hpp"
#include "jigsaw/sim/metrics.hpp"
#include "jigsaw/sim/sim.hpp"
#include "jigsaw/trace/trace.hpp"
#include "jigsaw/verify/verify.hpp"

namespace {

using namespace jigsaw;

struct SimArgs {
  std::string trace_path;
  std::vector<std::string> gen_trace;  // key=value tokens: seed, n, mean-interarrival-s
  std::string profiles = "data/profiles.csv";
  std::string out_dir = "out";
  std::string policies = "jigsaw";
  std::string iters_range = "50:500";
  std::string worker_mix;
  std::string save_trace;
  int gpus = 45;
  double mem_gb = 16.0;
  double interval_s = 60.0;
  double gamma_ms_per_mb = 0.8;
  std::uint64_t seed = 1;
  bool baseline_spb = false;
  bool emit_plan = false;
};

std::vector<std::string> split(const std::string& s, char sep) {
  std::vector<std::string> out;
  std::string cur;
  for (char c : s) {
    if (c == sep) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur += c;
    }
  }
  out.push_back(cur);
  return out;
}

trace::GenOptions parse_gen_options(const SimArgs& args, std::uint64_t* seed) {
  trace::GenOptions gen;
  auto range = split(args.iters_range, ':');
  if (range.size() != 2) throw ArgumentError("--iters-range expects LO:HI");
  gen.iterations_min = std::stoi(range[0]);
  gen.iterations_max = std::stoi(range[1]);
  if (!args.worker_mix.empty()) {
    gen.worker_mix.clear();
    for (const auto& part : split(args.worker_mix, ',')) {
      auto kv = split(part, '=');
      if (kv.size() != 2) throw ArgumentError("--worker-mix expects K=P,K=P,...");
      gen.worker_mix.emplace_back(std::stoi(kv[0]), std::stod(kv[1]));
    }
  }
  *seed = args.seed;
  for (const auto& token : args.gen_trace) {
    auto kv = split(token, '=');
    if (kv.size() != 2) throw ArgumentError("--gen-trace expects key=value tokens");
    if (kv[0] == "seed") *seed = std::stoull(kv[1]);
    else if (kv[0] == "n") gen.n_jobs = std::stoi(kv[1]);
    else if (kv[0] == "mean-interarrival-s") gen.mean_interarrival_s = std::stod(kv[1]);
    else if (kv[0] == "spb") gen.spb = kv[1] == "1";
    else throw ArgumentError("--gen-trace: unknown key " + kv[0]);
  }
  return gen;
}

int cmd_sim(const SimArgs& args) {
  auto profiles = cost::ProfileTable::load(args.profiles);

  std::vector<sched::JobDag> jobs;
  if (!args.trace_path.empty()) {
    jobs = trace::load(args.trace_path, profiles);
  } else {
    std::uint64_t seed = args.seed;
    auto gen = parse_gen_options(args, &seed);
    auto records = trace::generate(seed, gen, profiles.model_names());
    if (!args.save_trace.empty()) trace::save(args.save_trace, records);
    jobs = trace::to_jobs(records, profiles);
  }

  sim::ClusterConfig cluster{args.gpus, args.mem_gb};
  sim::SimOptions opts;
  opts.sched.interval_s = args.interval_s;
  opts.sched.gamma_ms_per_mb = args.gamma_ms_per_mb;
  opts.baselines_full_backprop = !args.baseline_spb;
  opts.seed = args.seed;

  std::vector<sim::MetricsReport> reports;
  for (const auto& name : split(args.policies, ',')) {
    auto policy = sim::parse_policy(name);
    reports.push_back(sim::run(jobs, profiles, policy, cluster, opts));
  }

  std::filesystem::create_directories(args.out_dir);
  csv::write_file_atomic(args.out_dir + "/summary.csv", sim::summary_csv(reports));
  for (const auto& r : reports) {
    csv::write_file_atomic(args.out_dir + "/jct_cdf_" + r.policy + ".csv",
                           sim::cdf_csv(sim::jct_cdf(r), "jct_us"));
    csv::write_file_atomic(args.out_dir + "/migration_cdf_" + r.policy + ".csv",
                           sim::cdf_csv(sim::migration_cdf(r), "migration_fraction"));
    csv::write_file_atomic(args.out_dir + "/util_" + r.policy + ".csv",
                           sim::util_csv(r, args.gpus, opts.sched.interval_us()));
    if (args.emit_plan)
      csv::write_file_atomic(args.out_dir + "/plan_" + r.policy + ".csv", sim::plan_csv(r));
  }

  std::printf("%-10s %14s %14s %8s\n", "policy", "makespan_s", "mean_jct_s", "failed");
  for (const auto& r : reports) {
    double sum = 0.0;
    int n = 0;
    for (const auto& j : r.jobs)
      if (!j.failed) {
        sum += static_cast<double>(j.jct);
        ++n;
      }
    std::printf("%-10s %14.3f %14.3f %8d\n", r.policy.c_str(),
                static_cast<double>(r.makespan) / 1e6, n ? sum / n / 1e6 : 0.0, r.failed_jobs);
  }
  return 0;
}

int cmd_verify(const verify::VerifyOptions& opts) {
  auto results = verify::run_verify_suite(opts);
  bool all_pass = true;
  for (const auto& r : results) {
    std::printf("[%s] %-28s %s\n", r.pass ? "PASS" : "FAIL", r.name.c_str(), r.detail.c_str());
    all_pass = all_pass && r.pass;
  }
  std::printf("%s\n", all_pass ? "all checks passed" : "CHECKS FAILED");
  return all_pass ? 0 : 1;
}

int cmd_oracle(int cases, std::uint64_t seed) {
  // Random tiny instances: heuristic vs exact optimum.
  sched::SchedulerConfig cfg;
  cfg.gamma_ms_per_mb = 0.8;
  int within_1_5 = 0;
  double worst_ratio = 1.0;
  for (int c = 0; c < cases; ++c) {
    Rng rng = Rng(seed).split(c + 1);
    int machines = 2 + static_cast<int>(rng.next_below(2));
    int n_jobs = 2 + static_cast<int>(rng.next_below(3));
    std::vector<sched::JobInstance> jobs;
    for (int j = 0; j < n_jobs; ++j) {
      sched::JobInstance job;
      job.index = j;
      job.job_id = "t" + std::to_string(j);
      job.workers = 1 + static_cast<int>(rng.next_below(2));
      job.total_iterations = 1 + static_cast<int>(rng.next_below(3));
      job.grad_size_mb = 10.0 + static_cast<double>(rng.next_below(100));
      for (int w = 0; w < job.workers; ++w) {
        cost::TaskDemand d;
        d.duration_ms = 5.0 + static_cast<double>(rng.next_below(40));
        d.peak_mem_gb = 4.0;
        job.demands.push_back(d);
      }
      jobs.push_back(std::move(job));
    }
    sim::ClusterConfig cluster{machines, 16.0};
    sim::SimOptions opts;
    opts.sched = cfg;
    auto report = sim::run_instances(jobs, sim::Policy::Jigsaw, cluster, opts);
    auto optimal = oracle::optimal_makespan(jobs, machines, 16.0, cfg, report.makespan);
    double ratio = static_cast<double>(report.makespan) / optimal.makespan;
    worst_ratio = std::max(worst_ratio, ratio);
    if (ratio <= 1.5) ++within_1_5;
    std::printf("case %3d: heuristic %8lld us, optimal %8lld us, ratio %.3f (%lld nodes)\n", c,
                static_cast<long long>(report.makespan),
                static_cast<long long>(optimal.makespan), ratio, optimal.nodes_explored);
  }
  std::printf("within 1.5x: %d/%d, worst ratio %.3f\n", within_1_5, cases, worst_ratio);
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Partial-backprop cluster scheduling simulator"};
  app.require_subcommand(1);

  SimArgs sim_args;
  auto* sim_cmd = app.add_subcommand("sim", "Run trace-driven scheduling simulations");
  sim_cmd->add_option("--trace", sim_args.trace_path, "Trace CSV to load");
  sim_cmd->add_option("--gen-trace", sim_args.gen_trace,
                      "Generate a synthetic trace; key=value tokens: seed, n, "
                      "mean-interarrival-s, spb")
      ->expected(0, -1);
  sim_cmd->add_option("--gpus", sim_args.gpus, "Number of single-GPU machines");
  sim_cmd->add_option("--mem-gb", sim_args.mem_gb, "Memory per GPU");
  sim_cmd->add_option("--policy", sim_args.policies,
                      "Comma list of jigsaw,gang,las,packing,random");
  sim_cmd->add_option("--interval-s", sim_args.interval_s, "Scheduling interval T");
  sim_cmd->add_option("--gamma-ms-per-mb", sim_args.gamma_ms_per_mb,
                      "Migration cost per MB of model state");
  sim_cmd->add_option("--profiles", sim_args.profiles, "Profile CSV");
  sim_cmd->add_option("--seed", sim_args.seed, "Seed for generation and random placement");
  sim_cmd->add_option("--out-dir", sim_args.out_dir, "Report directory");
  sim_cmd->add_option("--iters-range", sim_args.iters_range, "Iterations range LO:HI");
  sim_cmd->add_option("--worker-mix", sim_args.worker_mix, "Worker mix K=P,K=P,...");
  sim_cmd->add_option("--save-trace", sim_args.save_trace, "Write the generated trace here");
  sim_cmd->add_flag("--baseline-spb", sim_args.baseline_spb,
                    "Let gang baselines keep partial-backprop demands");
  sim_cmd->add_flag("--emit-plan", sim_args.emit_plan, "Also write plan_<policy>.csv");

  verify::VerifyOptions vopts;
  auto* verify_cmd = app.add_subcommand("verify", "Run the gradient-scheme verification suite");
  verify_cmd->add_option("--k", vopts.k, "Workers");
  verify_cmd->add_option("--B", vopts.B, "Global batch size");
  verify_cmd->add_option("--trials", vopts.trials, "Monte-Carlo trials");
  verify_cmd->add_option("--t", vopts.sgd_iterations, "SGD iterations");
  verify_cmd->add_option("--seed", vopts.seed, "Seed");

  int oracle_cases = 20;
  std::uint64_t oracle_seed = 1;
  auto* oracle_cmd = app.add_subcommand("oracle", "Compare the scheduler against brute force");
  oracle_cmd->group("");  // debugging helper, hidden from help
  oracle_cmd->add_option("--cases", oracle_cases, "Instances to test");
  oracle_cmd->add_option("--seed", oracle_seed, "Seed");

  CLI11_PARSE(app, argc, argv);

  try {
    if (sim_cmd->parsed()) return cmd_sim(sim_args);
    if (verify_cmd->parsed()) return cmd_verify(vopts);
    if (oracle_cmd->parsed()) return cmd_oracle(oracle_cases, oracle_seed);
  } catch (const std::exception& e) {
    std::fprintf(stderr, "error: %s\n", e.what());
    return 2;
  }
  return 0;
}
