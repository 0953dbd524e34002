use mmsim_rl::oracles::bandit_paying_probability;
use mmsim_rl::AgentKind;

#[test]
fn a2c_learns_the_paying_arm() {
    let p = bandit_paying_probability(AgentKind::A2c, 50_000, 1);
    assert!(p > 0.95, "paying arm probability {p}");
}

#[test]
fn ppo_learns_the_paying_arm() {
    let p = bandit_paying_probability(AgentKind::Ppo, 50_000, 1);
    assert!(p > 0.95, "paying arm probability {p}");
}
