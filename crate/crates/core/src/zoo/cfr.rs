//! Tabular CFR on explicitly enumerated game trees, plus exact best-response
//! exploitability.
//!
//! Information-set keys are prefixed with the seat (`p0|`, `p1|`) so a
//! strategy profile stores both players' behaviour in one table.

use std::collections::{BTreeMap, HashMap};
use std::fmt::Write as _;
use std::sync::Arc;

use rand::Rng as _;

use crate::error::{L2eError, Result};
use crate::games::poker::{new_hand, Card};
use crate::games::{rps, ActionSet, GameId, GameSpec, GameState, Player};
use crate::rng::Rng;

/// Information-set key of `player` at `state`.
pub fn info_key(state: &GameState, player: Player) -> String {
    let body = match state {
        GameState::Rps(_) => "rps".to_string(),
        GameState::Poker(s) => s.info_key(player),
        GameState::Soccer(_) => "soccer".to_string(),
    };
    format!("p{}|{}", player.index(), body)
}

#[derive(Clone, Debug)]
enum Node {
    Chance(Vec<(f64, usize)>),
    Decision {
        player: Player,
        infoset: usize,
        children: Vec<(usize, usize)>,
    },
    /// Payoff to the first player.
    Terminal(f64),
}

#[derive(Clone, Debug)]
pub struct InfoSet {
    pub key: String,
    pub player: Player,
    pub actions: ActionSet,
    nodes: Vec<usize>,
}

/// Fully expanded game tree for an enumerable game.
#[derive(Clone, Debug)]
pub struct GameTree {
    spec: GameSpec,
    nodes: Vec<Node>,
    infosets: Vec<InfoSet>,
    index: HashMap<String, usize>,
}

impl GameTree {
    pub fn build(spec: &GameSpec) -> Result<Self> {
        let mut t = GameTree {
            spec: *spec,
            nodes: Vec::new(),
            infosets: Vec::new(),
            index: HashMap::new(),
        };
        match spec.game_id {
            GameId::Rps => t.build_rps(),
            GameId::Leduc => t.build_poker()?,
            other => return Err(L2eError::NotEnumerable(other)),
        };
        Ok(t)
    }

    pub fn spec(&self) -> &GameSpec {
        &self.spec
    }

    pub fn node_count(&self) -> usize {
        self.nodes.len()
    }

    pub fn infosets(&self) -> &[InfoSet] {
        &self.infosets
    }

    fn push(&mut self, node: Node) -> usize {
        self.nodes.push(node);
        self.nodes.len() - 1
    }

    fn infoset_id(&mut self, key: String, player: Player, actions: ActionSet) -> usize {
        if let Some(&id) = self.index.get(&key) {
            debug_assert_eq!(self.infosets[id].actions, actions);
            return id;
        }
        let id = self.infosets.len();
        self.index.insert(key.clone(), id);
        self.infosets.push(InfoSet {
            key,
            player,
            actions,
            nodes: Vec::new(),
        });
        id
    }

    fn decision(&mut self, player: Player, infoset: usize, children: Vec<(usize, usize)>) -> usize {
        let id = self.push(Node::Decision {
            player,
            infoset,
            children,
        });
        self.infosets[infoset].nodes.push(id);
        id
    }

    fn build_rps(&mut self) {
        // second mover cannot see the first choice, which models simultaneity
        let state = GameState::Rps(Default::default());
        let all = ActionSet::all(3);
        let i0 = self.infoset_id(info_key(&state, Player::First), Player::First, all);
        let i1 = self.infoset_id(info_key(&state, Player::Second), Player::Second, all);
        let root = self.push(Node::Chance(Vec::new()));
        let mut first = Vec::new();
        for a in 0..3 {
            let leaves: Vec<(usize, usize)> = (0..3)
                .map(|b| (b, self.push(Node::Terminal(rps::payoff(a, b)))))
                .collect();
            first.push((a, self.decision(Player::Second, i1, leaves)));
        }
        let top = self.decision(Player::First, i0, first);
        self.nodes[root] = Node::Chance(vec![(1.0, top)]);
    }

    fn build_poker(&mut self) -> Result<()> {
        let spec = self.spec;
        let deck = spec.deck_size();
        let root = self.push(Node::Chance(Vec::new()));
        let mut deals = Vec::new();
        for button in Player::BOTH {
            for a in 0..deck {
                for b in (0..deck).filter(|&b| b != a) {
                    for c in (0..deck).filter(|&c| c != a && c != b) {
                        let s = new_hand(button, [Card::from_index(a), Card::from_index(b)], Card::from_index(c));
                        deals.push(GameState::Poker(s));
                    }
                }
            }
        }
        let p = 1.0 / deals.len() as f64;
        let mut children = Vec::with_capacity(deals.len());
        for s in deals {
            children.push((p, self.expand(&s)?));
        }
        self.nodes[root] = Node::Chance(children);
        Ok(())
    }

    fn expand(&mut self, state: &GameState) -> Result<usize> {
        let spec = self.spec;
        let player = spec.acting_players(state).iter().next().expect("non-terminal");
        let legal = spec.legal_actions(state, player)?;
        let iset = self.infoset_id(info_key(state, player), player, legal);
        let mut children = Vec::new();
        for a in legal.iter() {
            let mut acts = [None, None];
            acts[player.index()] = Some(a);
            let out = spec.step(state, acts)?;
            let child = if out.done {
                self.push(Node::Terminal(out.rewards[0]))
            } else {
                self.expand(&out.next_state)?
            };
            children.push((a, child));
        }
        Ok(self.decision(player, iset, children))
    }

    /// Expected payoff to the first player when both seats follow `strategy`.
    pub fn expected_value(&self, strategy: &TabularStrategy) -> Result<f64> {
        let probs = self.lookup(strategy)?;
        Ok(self.ev(0, &probs))
    }

    fn ev(&self, node: usize, probs: &[Vec<f64>]) -> f64 {
        match &self.nodes[node] {
            Node::Terminal(v) => *v,
            Node::Chance(ch) => ch.iter().map(|&(p, c)| p * self.ev(c, probs)).sum(),
            Node::Decision { infoset, children, .. } => children
                .iter()
                .map(|&(a, c)| {
                    let q = probs[*infoset][a];
                    if q == 0.0 {
                        0.0
                    } else {
                        q * self.ev(c, probs)
                    }
                })
                .sum(),
        }
    }

    fn lookup(&self, strategy: &TabularStrategy) -> Result<Vec<Vec<f64>>> {
        self.infosets
            .iter()
            .map(|is| {
                strategy
                    .get(&is.key)
                    .map(|v| v.to_vec())
                    .ok_or_else(|| L2eError::MissingInfoSet(is.key.clone()))
            })
            .collect()
    }

    /// Value `responder` obtains by best-responding to `strategy`'s other seat.
    pub fn best_response_value(&self, strategy: &TabularStrategy, responder: Player) -> Result<f64> {
        let probs = self.lookup(strategy)?;
        let mut reach = vec![0.0; self.nodes.len()];
        self.fill_reach(0, 1.0, responder, &probs, &mut reach);
        let mut br = BestResponse {
            tree: self,
            probs: &probs,
            reach: &reach,
            responder,
            value: vec![None; self.nodes.len()],
            choice: vec![None; self.infosets.len()],
        };
        Ok(br.value(0))
    }

    fn fill_reach(&self, node: usize, r: f64, responder: Player, probs: &[Vec<f64>], reach: &mut [f64]) {
        reach[node] = r;
        match &self.nodes[node] {
            Node::Terminal(_) => {}
            Node::Chance(ch) => {
                for &(p, c) in ch {
                    self.fill_reach(c, r * p, responder, probs, reach);
                }
            }
            Node::Decision {
                player,
                infoset,
                children,
            } => {
                for &(a, c) in children {
                    let q = if *player == responder { 1.0 } else { probs[*infoset][a] };
                    self.fill_reach(c, r * q, responder, probs, reach);
                }
            }
        }
    }
}

struct BestResponse<'a> {
    tree: &'a GameTree,
    probs: &'a [Vec<f64>],
    reach: &'a [f64],
    responder: Player,
    value: Vec<Option<f64>>,
    choice: Vec<Option<usize>>,
}

impl BestResponse<'_> {
    fn value(&mut self, node: usize) -> f64 {
        if let Some(v) = self.value[node] {
            return v;
        }
        let tree = self.tree;
        let v = match &tree.nodes[node] {
            Node::Terminal(v) => {
                if self.responder == Player::First {
                    *v
                } else {
                    -*v
                }
            }
            Node::Chance(ch) => ch.iter().map(|&(p, c)| p * self.value(c)).sum(),
            Node::Decision {
                player,
                infoset,
                children,
            } => {
                if *player == self.responder {
                    let best = self.choose(*infoset);
                    let child = children.iter().find(|&&(a, _)| a == best).expect("legal").1;
                    self.value(child)
                } else {
                    let mut acc = 0.0;
                    for &(a, c) in children {
                        let q = self.probs[*infoset][a];
                        if q != 0.0 {
                            acc += q * self.value(c);
                        }
                    }
                    acc
                }
            }
        };
        self.value[node] = Some(v);
        v
    }

    /// Best action at a responder information set, weighting each member
    /// history by the opponent and chance reach.
    fn choose(&mut self, infoset: usize) -> usize {
        if let Some(a) = self.choice[infoset] {
            return a;
        }
        let tree = self.tree;
        let is = &tree.infosets[infoset];
        let mut totals: Vec<(usize, f64)> = is.actions.iter().map(|a| (a, 0.0)).collect();
        for &n in &is.nodes {
            let w = self.reach[n];
            if let Node::Decision { children, .. } = &tree.nodes[n] {
                for &(a, c) in children {
                    let v = self.value(c);
                    if let Some(t) = totals.iter_mut().find(|t| t.0 == a) {
                        t.1 += w * v;
                    }
                }
            }
        }
        let best = totals
            .iter()
            .fold((usize::MAX, f64::NEG_INFINITY), |acc, &(a, v)| if v > acc.1 { (a, v) } else { acc })
            .0;
        self.choice[infoset] = Some(best);
        best
    }
}

/// Action probabilities per information set (zeros on illegal actions).
#[derive(Clone, Debug, PartialEq)]
pub struct TabularStrategy {
    game: GameId,
    action_count: usize,
    table: BTreeMap<String, Vec<f64>>,
}

impl TabularStrategy {
    pub fn new(game: GameId, action_count: usize) -> Self {
        TabularStrategy {
            game,
            action_count,
            table: BTreeMap::new(),
        }
    }

    /// Uniform over legal actions at every information set of the tree.
    pub fn uniform(tree: &GameTree) -> Self {
        Self::from_fn(tree, |is| {
            let k = is.actions.len() as f64;
            (0..tree.spec.action_count)
                .map(|a| if is.actions.contains(a) { 1.0 / k } else { 0.0 })
                .collect()
        })
    }

    pub fn from_fn(tree: &GameTree, mut f: impl FnMut(&InfoSet) -> Vec<f64>) -> Self {
        let mut s = TabularStrategy::new(tree.spec.game_id, tree.spec.action_count);
        for is in &tree.infosets {
            s.table.insert(is.key.clone(), f(is));
        }
        s
    }

    pub fn game(&self) -> GameId {
        self.game
    }

    pub fn get(&self, key: &str) -> Option<&[f64]> {
        self.table.get(key).map(Vec::as_slice)
    }

    pub fn insert(&mut self, key: String, probs: Vec<f64>) {
        self.table.insert(key, probs);
    }

    pub fn len(&self) -> usize {
        self.table.len()
    }

    pub fn is_empty(&self) -> bool {
        self.table.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&String, &Vec<f64>)> {
        self.table.iter()
    }

    /// Text manifest: a `#` header, then `key p0 p1 ...` per line with 17
    /// significant digits.
    pub fn to_text(&self) -> String {
        let mut out = format!("# game={} actions={}\n", self.game, self.action_count);
        for (k, v) in &self.table {
            out.push_str(k);
            for p in v {
                let _ = write!(out, " {:.16e}", p);
            }
            out.push('\n');
        }
        out
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut game = None;
        let mut actions = None;
        let mut table = BTreeMap::new();
        for (i, line) in text.lines().enumerate() {
            let line = line.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(h) = line.strip_prefix('#') {
                for kv in h.split_whitespace() {
                    if let Some(g) = kv.strip_prefix("game=") {
                        game = Some(g.parse::<GameId>()?);
                    } else if let Some(a) = kv.strip_prefix("actions=") {
                        actions = Some(a.parse::<usize>().map_err(|e| L2eError::Parse(e.to_string()))?);
                    }
                }
                continue;
            }
            let mut parts = line.split_whitespace();
            let key = parts.next().expect("non-empty line").to_string();
            let probs = parts
                .map(|p| p.parse::<f64>())
                .collect::<std::result::Result<Vec<_>, _>>()
                .map_err(|e| L2eError::Parse(format!("strategy line {}: {e}", i + 1)))?;
            table.insert(key, probs);
        }
        let game = game.ok_or_else(|| L2eError::Parse("strategy header missing game".into()))?;
        let action_count = actions.unwrap_or_else(|| GameSpec::from_id(game).action_count);
        Ok(TabularStrategy {
            game,
            action_count,
            table,
        })
    }
}

/// Vanilla CFR with simultaneous updates of both seats.
pub struct CfrSolver {
    tree: GameTree,
    regrets: Vec<Vec<f64>>,
    strategy_sum: Vec<Vec<f64>>,
    current: Vec<Vec<f64>>,
    iterations: usize,
}

impl CfrSolver {
    pub fn new(spec: &GameSpec) -> Result<Self> {
        let tree = GameTree::build(spec)?;
        let n = spec.action_count;
        let k = tree.infosets.len();
        Ok(CfrSolver {
            tree,
            regrets: vec![vec![0.0; n]; k],
            strategy_sum: vec![vec![0.0; n]; k],
            current: vec![vec![0.0; n]; k],
            iterations: 0,
        })
    }

    pub fn tree(&self) -> &GameTree {
        &self.tree
    }

    pub fn iterations(&self) -> usize {
        self.iterations
    }

    pub fn run(&mut self, iterations: usize) {
        for _ in 0..iterations {
            for (i, is) in self.tree.infosets.iter().enumerate() {
                regret_matching(&self.regrets[i], is.actions, &mut self.current[i]);
            }
            self.traverse(0, 1.0, 1.0, 1.0);
            self.iterations += 1;
        }
    }

    /// Returns the expected payoff to the first seat below `node`.
    fn traverse(&mut self, node: usize, r0: f64, r1: f64, rc: f64) -> f64 {
        match &self.tree.nodes[node] {
            Node::Terminal(v) => *v,
            Node::Chance(ch) => {
                let ch = ch.clone();
                ch.iter().map(|&(p, c)| p * self.traverse(c, r0, r1, rc * p)).sum()
            }
            Node::Decision {
                player,
                infoset,
                children,
            } => {
                let (player, iset) = (*player, *infoset);
                let children = children.clone();
                let mut vals = [0.0f64; 8];
                let mut v = 0.0;
                for &(a, c) in &children {
                    let q = self.current[iset][a];
                    let (n0, n1) = match player {
                        Player::First => (r0 * q, r1),
                        Player::Second => (r0, r1 * q),
                    };
                    if n0 == 0.0 && n1 == 0.0 {
                        continue;
                    }
                    vals[a] = self.traverse(c, n0, n1, rc);
                    v += q * vals[a];
                }
                let (own, cf, sign) = match player {
                    Player::First => (r0, r1 * rc, 1.0),
                    Player::Second => (r1, r0 * rc, -1.0),
                };
                for &(a, _) in &children {
                    self.regrets[iset][a] += cf * sign * (vals[a] - v);
                    self.strategy_sum[iset][a] += own * self.current[iset][a];
                }
                v
            }
        }
    }

    pub fn average_strategy(&self) -> TabularStrategy {
        let tree = &self.tree;
        let sums = &self.strategy_sum;
        let mut s = TabularStrategy::new(tree.spec.game_id, tree.spec.action_count);
        for (i, is) in tree.infosets.iter().enumerate() {
            let total: f64 = is.actions.iter().map(|a| sums[i][a]).sum();
            let k = is.actions.len() as f64;
            let probs = (0..tree.spec.action_count)
                .map(|a| match (is.actions.contains(a), total > 0.0) {
                    (false, _) => 0.0,
                    (true, true) => sums[i][a] / total,
                    (true, false) => 1.0 / k,
                })
                .collect();
            s.insert(is.key.clone(), probs);
        }
        s
    }

    /// Mean positive cumulative regret per information set, divided by the
    /// iteration count.
    pub fn average_positive_regret(&self) -> f64 {
        if self.iterations == 0 {
            return 0.0;
        }
        let total: f64 = self
            .regrets
            .iter()
            .zip(&self.tree.infosets)
            .map(|(r, is)| is.actions.iter().map(|a| r[a].max(0.0)).sum::<f64>())
            .sum();
        total / (self.tree.infosets.len() as f64 * self.iterations as f64)
    }
}

fn regret_matching(regrets: &[f64], legal: ActionSet, out: &mut [f64]) {
    out.iter_mut().for_each(|x| *x = 0.0);
    let pos: f64 = legal.iter().map(|a| regrets[a].max(0.0)).sum();
    let k = legal.len() as f64;
    for a in legal.iter() {
        out[a] = if pos > 0.0 { regrets[a].max(0.0) / pos } else { 1.0 / k };
    }
}

pub fn cfr_solve(spec: &GameSpec, iterations: usize) -> Result<TabularStrategy> {
    let mut solver = CfrSolver::new(spec)?;
    solver.run(iterations);
    Ok(solver.average_strategy())
}

/// Half the summed best-response gains of both seats against `strategy`.
pub fn exploitability(strategy: &TabularStrategy, spec: &GameSpec) -> Result<f64> {
    let tree = GameTree::build(spec)?;
    exploitability_on(&tree, strategy)
}

pub fn exploitability_on(tree: &GameTree, strategy: &TabularStrategy) -> Result<f64> {
    let b0 = tree.best_response_value(strategy, Player::First)?;
    let b1 = tree.best_response_value(strategy, Player::Second)?;
    Ok(0.5 * (b0 + b1))
}

/// Seat filled by sampling a tabular strategy.
#[derive(Clone, Debug)]
pub struct TabularOpponent {
    strategy: Arc<TabularStrategy>,
}

impl TabularOpponent {
    pub fn game(&self) -> GameId {
        self.strategy.game
    }

    pub fn strategy(&self) -> &TabularStrategy {
        &self.strategy
    }

    pub fn act(&self, spec: &GameSpec, state: &GameState, player: Player, rng: &mut Rng) -> Result<usize> {
        let legal = spec.legal_actions(state, player)?;
        let key = info_key(state, player);
        let probs = self.strategy.get(&key).ok_or(L2eError::MissingInfoSet(key))?;
        let u: f64 = rng.gen();
        let mut acc = 0.0;
        let mut last = None;
        for a in legal.iter() {
            acc += probs[a];
            last = Some(a);
            if u < acc {
                return Ok(a);
            }
        }
        Ok(last.expect("legal set is nonempty"))
    }
}

/// Wraps a strategy as an opponent after checking that it covers every
/// information set of the game.
pub fn nash_opponent(strategy: TabularStrategy) -> Result<TabularOpponent> {
    let tree = GameTree::build(&GameSpec::from_id(strategy.game))?;
    if let Some(missing) = tree.infosets.iter().find(|is| strategy.get(&is.key).is_none()) {
        return Err(L2eError::MissingInfoSet(missing.key.clone()));
    }
    Ok(TabularOpponent {
        strategy: Arc::new(strategy),
    })
}
