#include "fidsearch/cli.hpp"

#include <CLI11.hpp>
#include <charconv>
#include <filesystem>
#include <fstream>
#include <iterator>
#include <json.hpp>
#include <limits>
#include <optional>
#include <sstream>

#include "fidsearch/clustering.hpp"
#include "fidsearch/errors.hpp"
#include "fidsearch/evalharness.hpp"
#include "fidsearch/features_io.hpp"
#include "fidsearch/fid.hpp"
#include "fidsearch/parallel.hpp"
#include "fidsearch/search.hpp"
#include "fidsearch/synth.hpp"

namespace fidsearch {
namespace {

namespace fs = std::filesystem;

// JSON config files: top-level keys are flag names of the main command,
// nested objects are subcommands, e.g. {"threads": 4, "search": {"k": 50}}.
class JsonConfig : public CLI::Config {
 public:
  std::string to_config(const CLI::App*, bool, bool, std::string) const override { return "{}\n"; }

  std::vector<CLI::ConfigItem> from_config(std::istream& input) const override {
    nlohmann::json doc;
    try {
      doc = nlohmann::json::parse(input);
    } catch (const nlohmann::json::exception& e) {
      throw CLI::ConversionError(std::string("config file is not valid JSON: ") + e.what());
    }
    if (!doc.is_object()) throw CLI::ConversionError("config file must hold a JSON object");
    std::vector<CLI::ConfigItem> items;
    flatten(doc, {}, items);
    return items;
  }

 private:
  static std::string scalar(const nlohmann::json& v) {
    if (v.is_string()) return v.get<std::string>();
    return v.dump();
  }

  static void flatten(const nlohmann::json& obj, const std::vector<std::string>& parents,
                      std::vector<CLI::ConfigItem>& items) {
    for (const auto& [key, value] : obj.items()) {
      if (value.is_object()) {
        auto next = parents;
        next.push_back(key);
        flatten(value, next, items);
        continue;
      }
      CLI::ConfigItem item;
      item.parents = parents;
      item.name = key;
      if (value.is_array()) {
        for (const auto& v : value) item.inputs.push_back(scalar(v));
      } else {
        item.inputs.push_back(scalar(value));
      }
      items.push_back(std::move(item));
    }
  }
};

std::string format_number(double v) {
  char buf[64];
  auto res = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, res.ptr);
}

std::string read_text(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw_io("cannot open '" + path.string() + "' for reading");
  return std::string((std::istreambuf_iterator<char>(in)), std::istreambuf_iterator<char>());
}

void write_text(const fs::path& path, const std::string& text) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw_io("cannot open '" + path.string() + "' for writing");
  out << text;
  if (!out) throw_io("write failed for '" + path.string() + "'");
}

void ensure_dir(const fs::path& dir) {
  std::error_code ec;
  fs::create_directories(dir, ec);
  if (ec) throw_io("cannot create directory '" + dir.string() + "': " + ec.message());
}

std::optional<fs::path> optional_path(const std::string& s) {
  if (s.empty()) return std::nullopt;
  return fs::path(s);
}

struct PoolInputs {
  std::string pool;
  std::string identities;
  std::string target;
};

void add_pool_options(CLI::App* cmd, PoolInputs& in) {
  cmd->add_option("--pool", in.pool, "Pool feature table (.csv or FSF1 binary)")->required();
  cmd->add_option("--identities", in.identities,
                  "Identity manifest for the pool (identity<TAB>image[<TAB>key=value]); default: one identity per image");
  cmd->add_option("--target", in.target, "Target feature table")->required();
}

void add_kmeans_options(CLI::App* cmd, KMeansParams& params) {
  cmd->add_option("--max-iter", params.max_iter, "Maximum Lloyd iterations")->capture_default_str()->check(
      CLI::PositiveNumber);
  cmd->add_option("--tol", params.tol, "Convergence tolerance on centroid shift, relative to feature scale")
      ->capture_default_str()
      ->check(CLI::NonNegativeNumber);
}

int run(CLI::App& app, const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  std::size_t threads = 0;
  app.add_option("--threads", threads, "Worker threads (default: FIDSEARCH_THREADS or all cores)");
  app.config_formatter(std::make_shared<JsonConfig>());
  app.set_config("--config", "", "JSON config file; command-line flags take precedence");
  app.require_subcommand(1);

  // synth
  auto* synth = app.add_subcommand("synth", "Generate a synthetic population with known groups");
  std::string spec_path, fixture, synth_out, synth_format = "binary";
  std::optional<std::uint64_t> synth_seed;
  std::size_t fixture_dim = 64, fixture_pool = 8000, fixture_target = 300;
  auto* spec_opt = synth->add_option("--spec", spec_path, "Population spec (JSON)");
  auto* fixture_opt =
      synth->add_option("--fixture", fixture, "Built-in pool/target fixture instead of --spec")->check(
          CLI::IsMember({"standard"}));
  spec_opt->excludes(fixture_opt);
  synth->add_option("--out", synth_out, "Output directory")->required();
  synth->add_option("--seed", synth_seed, "Override the spec seed / fixture seed");
  synth->add_option("--dim", fixture_dim, "Fixture feature dimension")->capture_default_str()->check(
      CLI::Range(std::size_t{2}, std::size_t{1} << 20));
  synth->add_option("--pool-identities", fixture_pool, "Fixture pool size")->capture_default_str()->check(
      CLI::PositiveNumber);
  synth->add_option("--target-identities", fixture_target, "Fixture target size")->capture_default_str()->check(
      CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()));
  synth->add_option("--format", synth_format, "Feature file format")->capture_default_str()->check(
      CLI::IsMember({"binary", "csv"}));

  // cluster
  auto* cluster = app.add_subcommand("cluster", "k-means over identity-averaged features");
  std::string cl_features, cl_identities, cl_out;
  std::size_t cl_k = 100;
  std::uint64_t cl_seed = 0;
  KMeansParams cl_params;
  cluster->add_option("--features", cl_features, "Feature table")->required();
  cluster->add_option("--identities", cl_identities, "Identity manifest; default: one identity per image");
  cluster->add_option("--k", cl_k, "Number of clusters")->capture_default_str()->check(CLI::PositiveNumber);
  cluster->add_option("--seed", cl_seed, "Random seed")->capture_default_str();
  add_kmeans_options(cluster, cl_params);
  cluster->add_option("--out", cl_out, "Output directory (assignment.tsv, centroids.fsf)")->required();

  // fid
  auto* fidcmd = app.add_subcommand("fid", "Print the FID between two feature tables");
  std::string fid_a, fid_b;
  fidcmd->add_option("--a", fid_a, "First feature table")->required();
  fidcmd->add_option("--b", fid_b, "Second feature table")->required();

  // search
  auto* search = app.add_subcommand("search", "Cluster the pool, score clusters against the target, sample N images");
  PoolInputs search_in;
  SearchParams sp;
  std::string strategy = "greedy", manifest_out, ids_out;
  add_pool_options(search, search_in);
  search->add_option("--k", sp.k, "Number of clusters")->capture_default_str()->check(CLI::PositiveNumber);
  search->add_option("--n", sp.n, "Number of images to select")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{1}, std::numeric_limits<std::size_t>::max()));
  search->add_option("--seed", sp.seed, "Root random seed")->capture_default_str();
  add_kmeans_options(search, sp.kmeans);
  search->add_option("--min-cluster-images", sp.min_cluster_images, "Clusters with fewer images get zero weight")
      ->capture_default_str()
      ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()));
  search->add_option("--strategy", strategy, "greedy (cluster-weighted) or random (uniform identities)")
      ->capture_default_str()
      ->check(CLI::IsMember({"greedy", "random"}));
  search->add_option("--out", manifest_out, "Manifest JSON path")->required();
  search->add_option("--ids-out", ids_out, "Selected image IDs, one per line (default: <out>.ids)");

  // eval
  auto* eval = app.add_subcommand("eval", "Greedy-vs-random and K-sweep reports");
  eval->require_subcommand(1);
  HarnessConfig hc;
  PoolInputs eval_in;
  std::size_t seeds = 10;
  std::uint64_t first_seed = 0;
  std::string csv_out, json_out;
  auto* compare = eval->add_subcommand("compare", "FID of greedy vs random selections for each N");
  auto* sweep = eval->add_subcommand("sweep-k", "Greedy FID as a function of K");
  std::size_t sweep_n = 500;
  for (auto* cmd : {compare, sweep}) {
    add_pool_options(cmd, eval_in);
    cmd->add_option("--seeds", seeds, "Number of seeds")->capture_default_str()->check(CLI::PositiveNumber);
    cmd->add_option("--first-seed", first_seed, "First seed; seeds are consecutive")->capture_default_str();
    add_kmeans_options(cmd, hc.kmeans);
    cmd->add_option("--min-cluster-images", hc.min_cluster_images, "Clusters with fewer images get zero weight")
        ->capture_default_str()
        ->check(CLI::Range(std::size_t{2}, std::numeric_limits<std::size_t>::max()));
    cmd->add_option("--out-csv", csv_out, "Per-seed rows: strategy,k,n,seed,fid")->required();
    cmd->add_option("--out-json", json_out, "Aggregate summary JSON");
  }
  compare->add_option("--k", hc.k, "Number of clusters")->capture_default_str()->check(CLI::PositiveNumber);
  compare->add_option("--n-list", hc.n_list, "Selection sizes")->delimiter(',')->capture_default_str()->check(
      CLI::PositiveNumber);
  sweep->add_option("--k-list", hc.k_list, "Cluster counts")->delimiter(',')->capture_default_str()->check(
      CLI::PositiveNumber);
  sweep->add_option("--n", sweep_n, "Selection size")->capture_default_str()->check(CLI::PositiveNumber);

  std::vector<std::string> argv_rest(args.rbegin(), args.rend() - 1);
  try {
    app.parse(std::move(argv_rest));
  } catch (const CLI::CallForHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  } catch (const CLI::CallForAllHelp& e) {
    return app.exit(e, out, err) == 0 ? kExitOk : kExitValidation;
  } catch (const CLI::FileError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const CLI::ParseError& e) {
    app.exit(e, out, err);
    return kExitValidation;
  }
  set_thread_count(threads);

  if (synth->parsed()) {
    const fs::path dir(synth_out);
    const FeatureFormat format = synth_format == "csv" ? FeatureFormat::Csv : FeatureFormat::Binary;
    const std::string ext = synth_format == "csv" ? ".csv" : ".fsf";
    auto write_population = [&](const PopulationSpec& spec, const fs::path& sub) {
      ensure_dir(sub);
      const auto data = generate(spec);
      save_features(data.table, sub / ("features" + ext), format);
      save_identities(data.index, data.table, sub / "identities.tsv");
      err << "wrote " << data.table.rows() << " x " << data.table.dim() << " features to " << sub.string() << "\n";
    };
    if (!fixture.empty()) {
      auto spec = standard_fixture(fixture_dim, synth_seed.value_or(0), fixture_pool, fixture_target);
      write_population(spec.pool, dir / "pool");
      write_population(spec.target, dir / "target");
    } else {
      if (spec_path.empty()) throw_validation("synth needs --spec or --fixture");
      auto spec = spec_from_json(read_text(spec_path));
      if (synth_seed) spec.seed = *synth_seed;
      write_population(spec, dir);
    }
    return kExitOk;
  }

  if (cluster->parsed()) {
    const auto table = load_features(cl_features);
    const auto index = load_identities(optional_path(cl_identities), table);
    const auto clustering = cluster_identities(table, index, cl_k, cl_seed, cl_params);
    const fs::path dir(cl_out);
    ensure_dir(dir);
    save_clustering(clustering, dir / "assignment.tsv", dir / "centroids.fsf");
    err << "k=" << clustering.k() << " iterations=" << clustering.iterations
        << " inertia=" << format_number(clustering.inertia) << (clustering.converged ? "" : " (not converged)") << "\n";
    return kExitOk;
  }

  if (fidcmd->parsed()) {
    const auto a = load_features(fid_a);
    const auto b = load_features(fid_b);
    if (a.dim() != b.dim()) throw_validation("--a and --b have different dimensions");
    out << format_number(fid(summarize(a), summarize(b))) << "\n";
    return kExitOk;
  }

  if (search->parsed()) {
    const auto pool = load_features(search_in.pool);
    const auto index = load_identities(optional_path(search_in.identities), pool);
    const auto target = load_features(search_in.target);
    SearchManifest manifest;
    if (strategy == "random") {
      manifest = random_selection(pool, index, sp.n, sp.seed);
      manifest.params = sp;
      manifest.params.k = 1;
    } else {
      manifest = run_search(pool, index, target, sp);
    }
    manifest.paths = {{"pool", search_in.pool}, {"identities", search_in.identities}, {"target", search_in.target}};
    const fs::path json_path(manifest_out);
    const fs::path ids_path = ids_out.empty() ? fs::path(manifest_out + ".ids") : fs::path(ids_out);
    write_manifest(manifest, json_path, ids_path);
    const double gap = FidReference(to_matrix(target)).distance(pool, manifest.selected_rows);
    err << "selected " << manifest.selected.size() << " images; FID(target, selected) = " << format_number(gap) << "\n";
    return kExitOk;
  }

  if (eval->parsed()) {
    const auto pool = load_features(eval_in.pool);
    const auto index = load_identities(optional_path(eval_in.identities), pool);
    const auto target = load_features(eval_in.target);
    hc.seeds = seed_range(first_seed, seeds);
    Report report;
    if (compare->parsed()) {
      report = compare_strategies(pool, index, target, hc);
    } else {
      hc.n_list = {sweep_n};
      report = sweep_k(pool, index, target, hc);
    }
    write_text(csv_out, report_csv(report));
    if (!json_out.empty()) write_text(json_out, report_json(report));
    for (const auto& a : report.aggregates) {
      err << a.strategy << " k=" << a.k << " n=" << a.n << " mean_fid=" << format_number(a.mean)
          << " std=" << format_number(a.stddev) << "\n";
    }
    return kExitOk;
  }
  return kExitValidation;
}

}  // namespace

int run_cli(const std::vector<std::string>& args, std::ostream& out, std::ostream& err) {
  CLI::App app{"Training-set search: cluster a data pool, score clusters by FID to a target, sample a matching subset",
               "fidsearch"};
  try {
    return run(app, args, out, err);
  } catch (const IoError& e) {
    err << "error: " << e.what() << "\n";
    return kExitIo;
  } catch (const ValidationError& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  } catch (const std::exception& e) {
    err << "error: " << e.what() << "\n";
    return kExitValidation;
  }
}

}  // namespace fidsearch
