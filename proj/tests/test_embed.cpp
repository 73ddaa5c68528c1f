#define DOCTEST_CONFIG_IMPLEMENT_WITH_MAIN
#include <doctest.h>

#include <numeric>

#include "bgrl/embed.hpp"
#include "bgrl/error.hpp"
#include "bgrl/tabular.hpp"

using namespace bgrl;

namespace {

Trajectory with_rewards(std::vector<double> rewards) {
  Trajectory tr;
  for (std::size_t t = 0; t < rewards.size(); ++t) {
    tr.states.push_back(Eigen::Vector2d(static_cast<double>(t), 0.0));
    tr.actions.push_back(Eigen::Vector2d(0.0, 1.0));
  }
  tr.rewards = std::move(rewards);
  return tr;
}

Trajectory discrete_path(std::vector<int> states, std::vector<int> actions, int num_states) {
  Trajectory tr;
  for (std::size_t t = 0; t < states.size(); ++t) {
    tr.states.push_back(Eigen::VectorXd::Unit(num_states, states[t]));
    tr.actions.push_back(Eigen::VectorXd::Unit(2, actions[t]));
    tr.rewards.push_back(0.0);
  }
  tr.state_ids = std::move(states);
  tr.action_ids = std::move(actions);
  return tr;
}

Trajectory random_trajectory(Rng& rng, int sd, int ad, int horizon, int num_states) {
  Trajectory tr;
  for (int t = 0; t <= horizon; ++t) {
    tr.states.push_back(rng.normal_vector(sd));
    tr.actions.push_back(rng.normal_vector(ad));
    tr.rewards.push_back(rng.normal());
    tr.state_ids.push_back(static_cast<int>(rng.index(num_states)));
    tr.action_ids.push_back(static_cast<int>(rng.index(2)));
  }
  return tr;
}

}  // namespace

TEST_CASE("reward embeddings") {
  const Trajectory tr = with_rewards({1, 2, 3});
  CHECK(embed_trajectory(Bem{BemKind::RewardToGo}, tr) == Eigen::Vector3d(6, 5, 3));
  CHECK(embed_trajectory(Bem{BemKind::TotalReward}, tr) == Eigen::VectorXd::Constant(1, 6.0));
}

TEST_CASE("state embeddings") {
  const Trajectory tr = with_rewards({1, 2, 3});
  CHECK(embed_trajectory(Bem{BemKind::FinalState}, tr) == Eigen::Vector2d(2, 0));
  const Eigen::VectorXd acts = embed_trajectory(Bem{BemKind::ActionConcat}, tr);
  CHECK(acts.size() == 6);
  CHECK(acts == (Eigen::VectorXd(6) << 0, 1, 0, 1, 0, 1).finished());
  CHECK(embed_trajectory(Bem{BemKind::MeanXDisplacement}, tr)[0] == doctest::Approx(1.0));
}

TEST_CASE("mean x displacement averages the per-step moves") {
  Rng rng(2);
  for (int i = 0; i < 10; ++i) {
    const Trajectory tr = random_trajectory(rng, 2, 2, 7, 3);
    double sum = 0.0;
    for (int t = 0; t < 7; ++t) sum += tr.states[t + 1][0] - tr.states[t][0];
    CHECK(embed_trajectory(Bem{BemKind::MeanXDisplacement}, tr)[0] == doctest::Approx(sum / 7.0));
  }
}

TEST_CASE("count embeddings") {
  const Trajectory tr = discrete_path({0, 1, 0}, {1, 0, 1}, 3);
  Bem visit{BemKind::StateVisitCount, 3, 2};
  CHECK(embed_trajectory(visit, tr) == Eigen::Vector3d(2, 1, 0));
  Bem sa{BemKind::StateActionCount, 3, 2};
  Eigen::VectorXd expected = Eigen::VectorXd::Zero(6);
  expected[0 * 2 + 1] = 2;
  expected[1 * 2 + 0] = 1;
  CHECK(embed_trajectory(sa, tr) == expected);
  Bem fixed{BemKind::FixedStateFreq, 3, 2, 0};
  CHECK(embed_trajectory(fixed, tr) == Eigen::VectorXd::Constant(1, 2.0));

  CHECK_THROWS_AS(embed_trajectory(visit, with_rewards({1, 2})), Error);
  CHECK(visit.discrete());
  CHECK_FALSE(Bem{BemKind::FinalState}.discrete());
}

TEST_CASE("output dimension matches every kind") {
  Rng rng(5);
  for (BemKind k : {BemKind::FinalState, BemKind::ActionConcat, BemKind::TotalReward, BemKind::RewardToGo,
                    BemKind::StateVisitCount, BemKind::StateActionCount, BemKind::FixedStateFreq,
                    BemKind::MeanXDisplacement}) {
    CHECK(parse_bem_kind(to_string(k)) == k);
    for (int i = 0; i < 20; ++i) {
      const int sd = 1 + static_cast<int>(rng.index(4));
      const int ad = 1 + static_cast<int>(rng.index(3));
      const int h = 1 + static_cast<int>(rng.index(6));
      const Bem bem{k, 4, 2, 1};
      const Trajectory tr = random_trajectory(rng, sd, ad, h, 4);
      CHECK(embed_trajectory(bem, tr).size() == bem.output_dim(sd, ad, h));
    }
  }
  CHECK_THROWS_AS(parse_bem_kind("pixels"), Error);
}

TEST_CASE("embedding distributions merge equal points") {
  const Trajectory a = with_rewards({1, 2, 3});
  const Trajectory b = with_rewards({0, 0, 1});
  const Bem rtg{BemKind::RewardToGo};
  const EmpiricalEmbedding same = embedding_distribution(rtg, {a, a, a, a});
  CHECK(same.size() == 1);
  CHECK(same.weights()[0] == doctest::Approx(1.0));
  const EmpiricalEmbedding two = embedding_distribution(rtg, {a, b});
  CHECK(two.size() == 2);
  CHECK(two.weights()[0] == doctest::Approx(0.5));
  CHECK(two.weights()[1] == doctest::Approx(0.5));

  // distinct trajectories sharing a final state collapse under FinalState
  Trajectory c = a;
  c.states[0] = Eigen::Vector2d(-5, -5);
  const EmpiricalEmbedding fin = embedding_distribution(Bem{BemKind::FinalState}, {a, c, b});
  CHECK(fin.size() == 1);
  const EmpiricalEmbedding fin2 = embedding_distribution(Bem{BemKind::TotalReward}, {a, c, b});
  CHECK(fin2.size() == 2);
  CHECK(std::max(fin2.weights()[0], fin2.weights()[1]) == doctest::Approx(2.0 / 3.0));

  CHECK_THROWS_AS(embedding_distribution(rtg, {}), Error);
  CHECK_THROWS_AS(embedding_distribution(rtg, {a, with_rewards({1, 2})}), Error);

  EnvSpec spec;
  auto env = make_env(spec);
  const PolicyParams p = PolicyParams::random(Architecture{2, {5, 5}, 2}, 1.0, -0.5, 1);
  std::vector<Trajectory> rolls;
  for (int i = 0; i < 64; ++i) rolls.push_back(rollout(*env, p, derive_seed(1, "r", i)));
  const EmpiricalEmbedding e = embedding_distribution(Bem{BemKind::FinalState}, rolls);
  CHECK(std::abs(std::accumulate(e.weights().begin(), e.weights().end(), 0.0) - 1.0) <= 1e-12);
}

TEST_CASE("probe buffer") {
  ProbeBuffer buf(3);
  CHECK(buf.empty());
  Rng rng(1);
  CHECK_THROWS_AS(buf.sample(2, rng), Error);
  CHECK_THROWS_AS(ProbeBuffer(0), Error);
  for (int i = 0; i < 5; ++i) buf.insert(Eigen::VectorXd::Constant(1, i));
  CHECK(buf.size() == 3);
  const auto snap = buf.snapshot();
  CHECK(snap.front()[0] == 2.0);
  CHECK(snap.back()[0] == 4.0);
  for (const auto& s : buf.sample(200, rng)) CHECK(s[0] >= 2.0);
}

TEST_CASE("probe embeddings") {
  ProbeBuffer buf(50);
  Rng rng(3);
  for (int i = 0; i < 50; ++i) buf.insert(rng.normal_vector(2));
  const Architecture arch{2, {5, 5}, 2};

  const EmpiricalEmbedding zero = probe_embedding(buf, PolicyParams::zeros(arch), 20, 4);
  CHECK(zero.size() == 20);
  for (const auto& pt : zero.points()) CHECK(pt.tail(2).isZero());

  const PolicyParams p = PolicyParams::random(arch, 1.0, -0.5, 5);
  const EmpiricalEmbedding a = probe_embedding(buf, p, 30, 6);
  const EmpiricalEmbedding b = probe_embedding(buf, p, 30, 6);
  CHECK(exact_ot_discrete(a, b, CostKind::L2).value == 0.0);

  PolicyParams q = p;
  q.theta[q.arch.num_network_params() - 1] += 1e-3;
  const EmpiricalEmbedding c = probe_embedding(buf, q, 30, 6);
  const double wd = exact_ot_discrete(a, c, CostKind::L2).value;
  double bound = 0.0;
  for (const auto& s : buf.snapshot()) bound = std::max(bound, (policy_mean(p, s) - policy_mean(q, s)).norm());
  CHECK(wd > 0.0);
  CHECK(wd <= bound + 1e-15);

  CHECK_THROWS_AS(probe_embedding(ProbeBuffer(4), p, 3, 1), Error);
}

TEST_CASE("off-policy zero distance iff equal actions on the buffer") {
  ProbeBuffer buf(6);
  Rng rng(7);
  for (int i = 0; i < 6; ++i) buf.insert(rng.normal_vector(2) + Eigen::Vector2d(3, 3));
  const Architecture arch{2, {5}, 2};
  PolicyParams p = PolicyParams::random(arch, 1.0, -0.5, 8);
  // make every hidden unit active on the buffer so layer-1 edits are visible
  p.theta.segment(2 * 5, 5).setConstant(10.0);
  PolicyParams dead = p;
  // a hidden unit whose ReLU is off on every buffered state is invisible
  dead.theta.segment(0, 2).setConstant(-5.0);
  dead.theta[2 * 5] = -1.0;
  PolicyParams same_on_buffer = dead;
  same_on_buffer.theta[2 * 5 + 5 + 0] += 0.7;  // output weight of the dead unit
  CHECK(exact_ot_discrete(probe_embedding(buf, dead, 40, 1), probe_embedding(buf, same_on_buffer, 40, 1),
                          CostKind::L2).value == 0.0);
  PolicyParams changed = dead;
  changed.theta[2 * 5 + 5 + 1] += 0.7;
  CHECK(exact_ot_discrete(probe_embedding(buf, dead, 40, 1), probe_embedding(buf, changed, 40, 1),
                          CostKind::L2).value > 0.0);
}
