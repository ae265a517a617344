// psh: one binary, four subcommands.
//
//   party    serve one protocol role over TCP
//   train    train logistic regression or the split DNN, framework or local
//   privacy  tabulate analytic privacy bounds, optionally run attack simulations
//   report   merge run CSVs and emit plot data
//
// See README.md for worked examples.

#include <atomic>
#include <csignal>
#include <cstdio>
#include <fstream>
#include <iostream>
#include <sstream>
#include <thread>

#include <CLI11.hpp>

#include "psh/psh.hpp"

namespace {

std::atomic<bool> g_stop{false};

void on_signal(int) { g_stop.store(true); }

std::vector<double> parse_list_f(const std::string& s) {
  std::vector<double> out;
  std::stringstream in(s);
  std::string item;
  while (std::getline(in, item, ',')) {
    if (item.empty()) continue;
    out.push_back(std::stod(item));
  }
  return out;
}

std::vector<std::size_t> parse_list_n(const std::string& s) {
  std::vector<std::size_t> out;
  for (double v : parse_list_f(s)) out.push_back(std::size_t(v));
  return out;
}

std::string epsilon_str(const psh::PrivacyBound& b) {
  char buf[64];
  if (b.log_form) {
    std::snprintf(buf, sizeof buf, "2^%.4f", b.log2_epsilon);
  } else {
    std::snprintf(buf, sizeof buf, "%.6g", b.epsilon);
  }
  return buf;
}

int run_party(const std::string& role_s, const std::string& listen,
              const std::string& peers_path, std::uint64_t seed,
              double mask_bound, double run_seconds) {
  const psh::NodeRole role = psh::node_role_from_name(role_s);
  psh::Topology topo;
  if (!peers_path.empty()) {
    std::ifstream in(peers_path);
    if (!in) {
      std::cerr << "cannot open peers file: " << peers_path << "\n";
      return 1;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    topo = psh::parse_topology(buf.str());
  }
  if (!listen.empty()) {
    const auto colon = listen.rfind(':');
    if (colon == std::string::npos) {
      std::cerr << "--listen expects host:port\n";
      return 1;
    }
    topo.nodes[std::size_t(role)] =
        psh::Endpoint{listen.substr(0, colon),
                      std::uint16_t(std::stoi(listen.substr(colon + 1)))};
  }
  if (!topo.has(role)) {
    std::cerr << "no listen address for role " << role_s
              << " (give --listen or a peers file entry)\n";
    return 1;
  }

  psh::PartyNode node({role, seed, mask_bound});
  psh::TcpNodeHost host(node, topo);
  host.start();
  const auto& ep = topo.at(role);
  std::cout << "party " << role_s << " listening on " << ep.host << ":"
            << ep.port << " (seed " << seed << ")" << std::endl;

  std::signal(SIGINT, on_signal);
  std::signal(SIGTERM, on_signal);
  const auto t0 = std::chrono::steady_clock::now();
  while (!g_stop.load()) {
    std::this_thread::sleep_for(std::chrono::milliseconds(100));
    if (run_seconds > 0 &&
        std::chrono::duration<double>(std::chrono::steady_clock::now() - t0)
                .count() >= run_seconds)
      break;
  }
  host.stop();
  std::cout << "party " << role_s << " stopped" << std::endl;
  return 0;
}

int run_train(psh::TrainOptions opt, const std::string& dataset_kind,
              const std::string& images, const std::string& labels,
              std::size_t limit, std::size_t train_n, std::size_t val_n,
              const std::string& config, const std::string& out,
              const std::string& vega) {
  psh::Dataset ds;
  if (!images.empty() || !labels.empty()) {
    if (images.empty() || labels.empty()) {
      std::cerr << "--images and --labels must be given together\n";
      return 1;
    }
    if (limit == 0) limit = train_n + val_n;
    ds = psh::load_idx(images, labels, limit);
  } else {
    std::size_t n = limit ? limit : train_n + val_n;
    ds = psh::dataset_from_raw(
        psh::synth_dataset(psh::synth_kind_from_name(dataset_kind), n,
                           opt.seed),
        n);
  }
  ds.split(train_n, val_n);

  psh::Coordinator coord(opt.seed, opt.mask_bound);
  std::optional<psh::CoordinatorSockets> socks;
  if (!config.empty()) {
    if (opt.mode != "framework") {
      std::cerr << "--config only applies to --mode framework\n";
      return 1;
    }
    std::ifstream in(config);
    if (!in) {
      std::cerr << "cannot open config: " << config << "\n";
      return 1;
    }
    std::ostringstream buf;
    buf << in.rdbuf();
    const psh::Topology topo = psh::parse_topology(buf.str());
    socks.emplace(psh::connect_coordinator(coord, topo));
    opt.coord = &coord;
  }

  const auto records = psh::train_run(ds, opt);
  for (const auto& r : records) {
    std::printf("batch %6zu  %-9s  val_acc %.4f  loss %.6f  %.2fs\n", r.batch,
                r.mode.c_str(), r.val_accuracy, r.loss, r.elapsed_s);
  }
  if (!records.empty()) {
    std::printf("final: %s %s accuracy %.4f after %zu batches (%.2fs)\n",
                opt.model.c_str(), opt.mode.c_str(),
                records.back().val_accuracy, records.back().batch,
                records.back().elapsed_s);
  }
  if (!out.empty()) {
    psh::write_records_csv(out, records);
    std::cout << "wrote " << out << "\n";
  }
  if (!vega.empty()) {
    psh::write_records_vega(vega, records, opt.model + " training");
    std::cout << "wrote " << vega << "\n";
  }
  return 0;
}

int run_privacy(const std::string& n_list, const std::string& delta_list,
                const std::string& sigma_list, const std::string& k_list,
                const std::string& m_list, const std::string& csv_path,
                const std::string& attack, const std::string& strategy,
                std::size_t trials, std::size_t attack_n, std::size_t attack_m,
                double attack_sigma, double attack_delta, std::uint64_t seed) {
  const auto ns = parse_list_n(n_list);
  const auto deltas = parse_list_f(delta_list);
  const auto sigmas = parse_list_f(sigma_list);
  const auto ks = parse_list_f(k_list);
  const auto ms = parse_list_n(m_list);

  // kind,n,m,delta,sigma,k,epsilon,log2_epsilon
  std::ostringstream csv;
  csv << "kind,n,m,delta,sigma,k,epsilon,log2_epsilon\n";
  char line[256];

  for (std::size_t n : ns) {
    const auto b = psh::permutation_privacy(n);
    std::snprintf(line, sizeof line, "permutation  n=%-6zu %-24s log2=%.4f",
                  n, ("epsilon=" + epsilon_str(b)).c_str(), b.log2_epsilon);
    std::cout << line << "\n";
    csv << "permutation," << n << ",,,,," << (b.log_form ? "" : epsilon_str(b))
        << "," << psh::detail::csv_double(b.log2_epsilon) << "\n";
  }
  for (std::size_t n : ns) {
    if (n < 2) continue;
    for (double d : deltas) {
      const auto b = psh::linear_privacy_bound(n, d);
      std::snprintf(line, sizeof line,
                    "linear-bound n=%-4zu delta=%-6g epsilon<=%.6g log2=%.4f",
                    n, d, b.epsilon, b.log2_epsilon);
      std::cout << line << "\n";
      csv << "linear," << n << ",," << d << ",,," << epsilon_str(b) << ","
          << psh::detail::csv_double(b.log2_epsilon) << "\n";
    }
  }
  for (double s : sigmas) {
    for (double k : ks) {
      const auto b = psh::noise_privacy(s, k);
      std::snprintf(line, sizeof line,
                    "noise        sigma=%-4g k=%-4g epsilon=%.6g delta=%g", s,
                    k, b.epsilon, *b.delta);
      std::cout << line << "\n";
      csv << "noise,,,," << s << "," << k << "," << epsilon_str(b) << ","
          << psh::detail::csv_double(b.log2_epsilon) << "\n";
    }
  }
  for (std::size_t n : ns) {
    for (std::size_t m : ms) {
      if (m > n) continue;
      const auto js = psh::join_attack_space(n, m);
      std::snprintf(line, sizeof line,
                    "join-space   n=%-4zu m=%-4zu candidates log2=%.4f", n, m,
                    js.log2);
      std::cout << line << "\n";
      csv << "join," << n << "," << m << ",,,,,"
          << psh::detail::csv_double(js.log2) << "\n";
    }
  }

  if (!attack.empty()) {
    psh::AttackParams p;
    p.kind = psh::transform_kind_from_name(attack);
    p.strategy = psh::attacker_strategy_from_name(strategy);
    p.n = attack_n;
    p.m = attack_m;
    p.sigma = attack_sigma;
    p.delta = attack_delta;
    psh::Rng rng(seed);
    const auto res = psh::attack_simulate(p, trials, rng);
    const auto bound = psh::attack_bound(p);
    std::printf(
        "attack %s/%s: rate %.6f [%.6f, %.6f] over %zu trials; bound %.6g "
        "-> %s\n",
        attack.c_str(), strategy.c_str(), res.rate, res.interval.lo,
        res.interval.hi, res.trials, bound.epsilon,
        res.rate <= bound.epsilon + 3 * res.interval.half_width ? "consistent"
                                                                : "EXCEEDED");
  }

  if (!csv_path.empty()) {
    std::ofstream out(csv_path, std::ios::binary);
    if (!out) {
      std::cerr << "cannot open for writing: " << csv_path << "\n";
      return 1;
    }
    out << csv.str();
    std::cout << "wrote " << csv_path << "\n";
  }
  return 0;
}

int run_report(const std::vector<std::string>& inputs, const std::string& out,
               const std::string& vega, const std::string& title) {
  std::vector<std::vector<psh::RunRecord>> runs;
  for (const auto& path : inputs) runs.push_back(psh::read_records_csv(path));
  const auto merged = psh::merge_records(runs);
  std::cout << "merged " << merged.size() << " records from " << inputs.size()
            << " file(s)\n";
  if (!out.empty()) {
    psh::write_records_csv(out, merged);
    std::cout << "wrote " << out << "\n";
  }
  if (!vega.empty()) {
    psh::write_records_vega(vega, merged, title);
    std::cout << "wrote " << vega << "\n";
  }
  return 0;
}

}  // namespace

int main(int argc, char** argv) {
  CLI::App app{"secret-shared training over permuted nonlinear evaluation"};
  app.require_subcommand(1);

  // party
  auto* party = app.add_subcommand("party", "serve one protocol role");
  std::string role_s, listen, peers;
  std::uint64_t seed = 1;
  double mask_bound = psh::kDefaultMaskBound;
  double run_seconds = 0;
  party->add_option("--role", role_s, "p0|p1|p3|dealer|tail")
      ->required()
      ->envname("PSH_ROLE");
  party->add_option("--listen", listen, "host:port to listen on")
      ->envname("PSH_LISTEN");
  party->add_option("--peers", peers, "topology file: role = host:port lines")
      ->envname("PSH_PEERS");
  party->add_option("--seed", seed, "shared deployment seed")
      ->envname("PSH_SEED");
  party->add_option("--mask-bound", mask_bound, "share mask bound")
      ->envname("PSH_MASK_BOUND");
  party->add_option("--run-seconds", run_seconds,
                    "exit after this many seconds (0 = until signal)");

  // train
  auto* train = app.add_subcommand("train", "train a model");
  psh::TrainOptions topt;
  std::string dataset_kind = "blobs", images, labels, config, out, vega;
  std::size_t limit = 0, train_n = 2000, val_n = 500;
  train->add_option("--model", topt.model, "logistic|dnn")
      ->check(CLI::IsMember({"logistic", "dnn"}));
  train->add_option("--mode", topt.mode, "framework|local")
      ->check(CLI::IsMember({"framework", "local"}));
  train->add_option("--steps", topt.steps, "number of batches");
  train->add_option("--seed", topt.seed, "seed for init/batch order");
  train->add_option("--limit", limit, "cap on dataset size (0 = train+val)");
  train->add_option("--train-n", train_n, "training samples");
  train->add_option("--val-n", val_n, "validation samples");
  train->add_option("--batch", topt.batch_size, "batch size");
  train->add_option("--lr", topt.lr, "learning rate");
  train->add_option("--hidden", topt.hidden, "hidden units (dnn)");
  train->add_option("--checkpoint-every", topt.checkpoint_every,
                    "batches between validation checkpoints");
  train->add_option("--mask-bound", topt.mask_bound, "share mask bound");
  train->add_option("--dataset", dataset_kind, "synthetic set: blobs|sectors");
  train->add_option("--images", images, "IDX image file");
  train->add_option("--labels", labels, "IDX label file");
  train->add_option("--config", config,
                    "topology file; framework mode drives live parties");
  train->add_option("--out", out, "write run CSV here");
  train->add_option("--vega", vega, "write vega-lite JSON here");

  // privacy
  auto* privacy = app.add_subcommand("privacy", "tabulate privacy bounds");
  std::string n_list = "2,3,5,10,100", delta_list = "0.5,1,2";
  std::string sigma_list = "1,2", k_list = "1,2,3", m_list = "2,3";
  std::string csv_path, attack, strategy = "random_guess";
  std::size_t trials = 100000, attack_n = 4, attack_m = 3;
  double attack_sigma = 1.0, attack_delta = 0.1;
  std::uint64_t pseed = 1;
  privacy->add_option("--n-list", n_list, "input sizes");
  privacy->add_option("--delta-list", delta_list, "recovery radii");
  privacy->add_option("--sigma-list", sigma_list, "noise scales");
  privacy->add_option("--k-list", k_list, "noise radius multiples");
  privacy->add_option("--m-list", m_list, "join overlap sizes");
  privacy->add_option("--csv", csv_path, "also write the table as CSV");
  privacy->add_option("--attack", attack,
                      "simulate: permutation|linear|noise");
  privacy->add_option("--strategy", strategy, "random_guess|best_known");
  privacy->add_option("--trials", trials, "Monte-Carlo trials");
  privacy->add_option("--attack-n", attack_n, "attack input size");
  privacy->add_option("--attack-m", attack_m, "attack output size (linear)");
  privacy->add_option("--attack-sigma", attack_sigma, "attack noise scale");
  privacy->add_option("--attack-delta", attack_delta, "recovery radius");
  privacy->add_option("--seed", pseed, "simulation seed");

  // report
  auto* report = app.add_subcommand("report", "merge run CSVs");
  std::vector<std::string> inputs;
  std::string rout, rvega, rtitle = "training curves";
  report->add_option("inputs", inputs, "run CSV files")->required();
  report->add_option("--out", rout, "merged CSV path");
  report->add_option("--vega", rvega, "vega-lite JSON path");
  report->add_option("--title", rtitle, "plot title");

  CLI11_PARSE(app, argc, argv);

  try {
    if (*party)
      return run_party(role_s, listen, peers, seed, mask_bound, run_seconds);
    if (*train)
      return run_train(topt, dataset_kind, images, labels, limit, train_n,
                       val_n, config, out, vega);
    if (*privacy)
      return run_privacy(n_list, delta_list, sigma_list, k_list, m_list,
                         csv_path, attack, strategy, trials, attack_n,
                         attack_m, attack_sigma, attack_delta, pseed);
    if (*report) return run_report(inputs, rout, rvega, rtitle);
  } catch (const std::exception& e) {
    std::cerr << "error: " << e.what() << "\n";
    return 1;
  }
  return 0;
}
