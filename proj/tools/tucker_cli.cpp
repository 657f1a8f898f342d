// Command-line front end: gen, run, bench, aggregate, inspect.

#include <fstream>
#include <iostream>
#include <sstream>

#include "CLI11.hpp"
#include "tucker/harness.hpp"

namespace {

using namespace tucker;

std::vector<std::size_t> parse_order(const std::string& text, std::size_t n_modes) {
  if (text.empty()) return {};
  std::vector<std::size_t> order;
  for (Index m : parse_dims(text)) {
    if (m < 1 || static_cast<std::size_t>(m) > n_modes) throw std::invalid_argument("--sp-order entries are 1-based modes");
    order.push_back(static_cast<std::size_t>(m - 1));
  }
  return order;
}

void write_text(const std::string& path, const std::string& text) {
  if (path == "-") {
    std::cout << text;
    return;
  }
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw std::runtime_error("cannot write " + path);
  out << text;
  out.close();
  if (!out) throw std::runtime_error("write failed on " + path);
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"Tucker decompositions of sparse tensors, in memory or out of core"};
  app.require_subcommand(1);

  // gen
  auto* gen = app.add_subcommand("gen", "write a random sparse tensor in COO text format");
  std::string gen_dims, gen_out;
  double gen_density = 0.1;
  std::uint64_t gen_seed = 1;
  gen->add_option("--dims", gen_dims, "tensor dims, e.g. 60x60x60")->required();
  gen->add_option("--density", gen_density, "probability that a cell is nonzero")->required();
  gen->add_option("--seed", gen_seed, "RNG seed");
  gen->add_option("--out", gen_out, "output COO file")->required();

  // run
  auto* run_cmd = app.add_subcommand("run", "decompose one input");
  std::string algo = "hooi", input, dims, core, out, metrics, work_dir, sp_order, hooi_fit = "streaming";
  std::string sort_buffer = "256M";
  double tol = 1e-4;
  std::size_t max_iters = 50;
  std::uint64_t seed = 0;
  Index slab_size = 0;
  bool strict_eig = false;
  run_cmd->add_option("--algo", algo, "hosvd, hooi, sp or mp")
      ->check(CLI::IsMember({"hosvd", "hooi", "sp", "mp"}));
  run_cmd->add_option("--input", input, "COO text file")->required();
  run_cmd->add_option("--dims", dims, "tensor dims, e.g. 60x60x60")->required();
  run_cmd->add_option("--core", core, "core dims, e.g. 6x6x6")->required();
  run_cmd->add_option("--tol", tol, "threshold for both stopping rules");
  run_cmd->add_option("--max-iters", max_iters, "iteration cap");
  run_cmd->add_option("--seed", seed, "seed of the SP random start");
  run_cmd->add_option("--sort-buffer", sort_buffer, "external sort buffer, e.g. 64M (minimum 1M)");
  run_cmd->add_option("--slab-size", slab_size, "slices per slab file, 0 for about 64 MiB per slab");
  run_cmd->add_option("--out", out, "decomposition container to write");
  run_cmd->add_option("--metrics", metrics, "metrics JSON file, '-' for stdout");
  run_cmd->add_option("--work-dir", work_dir, "slice store cache (default <input>.stores)");
  run_cmd->add_option("--sp-order", sp_order, "SP update order as 1-based modes, e.g. 3,1,2");
  run_cmd->add_flag("--strict-eig", strict_eig, "eigendecompose M*M^T instead of M");
  run_cmd->add_option("--hooi-fit", hooi_fit, "streaming or norm-identity")
      ->check(CLI::IsMember({"streaming", "norm-identity"}));

  // bench
  auto* bench = app.add_subcommand("bench", "run a benchmark spec and write one CSV row per run");
  std::string spec_path, out_csv;
  unsigned jobs = 1;
  bool deterministic = false, keep_files = false;
  bench->add_option("--spec", spec_path, "benchmark spec file")->required();
  bench->add_option("--out-csv", out_csv, "CSV report, '-' for stdout")->required();
  bench->add_option("--jobs", jobs, "concurrent (instance, seed) cells");
  bench->add_flag("--deterministic", deterministic, "zero the timing columns");
  bench->add_flag("--keep-files", keep_files, "keep generated tensors, stores and containers");

  // aggregate
  auto* agg = app.add_subcommand("aggregate", "means over seeds of a bench CSV");
  std::string agg_in, agg_out = "-";
  agg->add_option("--in-csv", agg_in, "bench CSV")->required();
  agg->add_option("--out-csv", agg_out, "aggregate CSV, '-' for stdout");

  // inspect
  auto* inspect = app.add_subcommand("inspect", "describe a decomposition container");
  std::string model_path, inspect_input, inspect_dims;
  inspect->add_option("--model", model_path, "container file")->required();
  inspect->add_option("--input", inspect_input, "COO file to measure the fit against");
  inspect->add_option("--dims", inspect_dims, "dims of --input (default: the model's)");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*gen) {
      const auto coo = gen_random_tensor(parse_dims(gen_dims), gen_density, gen_seed, gen_out);
      std::cout << "wrote " << coo.nnz << " nonzeros to " << gen_out << "\n";
    } else if (*run_cmd) {
      RunConfig cfg;
      cfg.algorithm = parse_algorithm(algo);
      cfg.input = input;
      cfg.dims = parse_dims(dims);
      cfg.core = parse_dims(core);
      cfg.convergence.fit_threshold = tol;
      cfg.convergence.core_growth_threshold = tol;
      cfg.convergence.max_iterations = max_iters;
      cfg.decomp.seed = seed;
      cfg.decomp.sp_order = parse_order(sp_order, cfg.dims.size());
      cfg.decomp.eigen.square = strict_eig;
      cfg.decomp.hooi_fit = hooi_fit == "streaming" ? HooiFitMethod::streaming : HooiFitMethod::norm_identity;
      cfg.sort_buffer_bytes = parse_byte_size(sort_buffer);
      cfg.slab_size = slab_size;
      cfg.work_dir = work_dir;
      cfg.output = out;
      const auto outcome = run(cfg);
      const auto& m = outcome.metrics;
      if (!metrics.empty()) write_text(metrics, metrics_json(m) + "\n");
      if (metrics != "-")
        std::cout << m.algorithm << " fit " << format_double(m.fit) << " after " << m.iterations << " iteration(s) ("
                  << m.terminated_by << "), " << format_double(m.seconds) << " s, peak " << m.peak_bytes
                  << " tracked bytes\n";
    } else if (*bench) {
      BenchOptions opts;
      opts.jobs = jobs;
      opts.deterministic = deterministic;
      opts.keep_files = keep_files;
      const auto rows = run_bench(load_bench_spec(spec_path), opts);
      std::ostringstream csv;
      write_bench_csv(csv, rows, deterministic);
      write_text(out_csv, csv.str());
    } else if (*agg) {
      std::ifstream in(agg_in, std::ios::binary);
      if (!in) throw std::runtime_error("cannot open " + agg_in);
      std::ostringstream csv;
      write_aggregate_csv(csv, read_csv(in));
      write_text(agg_out, csv.str());
    } else if (*inspect) {
      const auto model = load_model(model_path);
      std::cout << "order " << model.order() << "\n"
                << "dims " << format_dims(model.dims()) << "\n"
                << "core " << format_dims(model.core_dims()) << "\n"
                << "core norm " << format_double(frobenius_norm(model.core)) << "\n"
                << "orthonormality error " << format_double(orthonormality_error(model)) << "\n";
      if (!inspect_input.empty()) {
        const Dims d = inspect_dims.empty() ? model.dims() : parse_dims(inspect_dims);
        CooParseOptions parse;
        parse.check_duplicates = false;
        const auto x = load_sparse(parse_coo(inspect_input, d, parse));
        std::cout << "fit " << format_double(sparse_fit(x, model)) << "\n";
      }
    }
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
