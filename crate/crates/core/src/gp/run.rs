//! One seeded cooperative evolution run.

use alloc::vec::Vec;

use rand::seq::index::sample;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use super::config::GpConfig;
use super::fitness::{softmax_ce, team_logits};
use super::init::init_populations;
use super::model::{Individual, SurrogateModel};
use super::tune::tune_constants;
use super::variation::{point_mutate, subtree_crossover};
use crate::expr::Program;
use crate::matrix::Matrix;
use crate::select::{macro_f1, RunRecord};
use crate::spfp::ViewPartition;
use crate::{Error, Result};

/// Standardized data with frozen split indices. Only `train` and `val` rows
/// are ever read.
#[derive(Debug, Clone, Copy)]
pub struct RunData<'a> {
    pub x: &'a Matrix,
    pub y: &'a [usize],
    pub train: &'a [usize],
    pub val: &'a [usize],
}

/// Per-generation champion cross-entropy on the full training split.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct RunTrace {
    pub champion_train_ce: Vec<f64>,
}

pub fn run(data: &RunData<'_>, partition: &ViewPartition, classes: usize, config: &GpConfig, seed: u64) -> Result<RunRecord> {
    run_traced(data, partition, classes, config, seed).map(|(r, _)| r)
}

fn team_ce(team: &[Vec<Program>], data: &RunData<'_>, rows: &[usize], labels: &[usize], epsilon: f64) -> Result<f64> {
    softmax_ce(&team_logits(team, data.x, rows, epsilon)?, labels)
}

fn eval_genes(genes: &[Program], x: &Matrix, rows: &[usize], epsilon: f64) -> Matrix {
    let mut z = Matrix::zeros(rows.len(), genes.len());
    for (c, g) in genes.iter().enumerate() {
        for (i, &r) in rows.iter().enumerate() {
            z.set(i, c, g.root().eval_raw(x.row(r), epsilon));
        }
    }
    z
}

/// Sum of per-view contributions in ascending view order, optionally with
/// one view swapped out. Matches [`team_logits`] bit for bit.
fn sum_views(contrib: &[Matrix], swap: Option<(usize, &Matrix)>) -> Matrix {
    let (rows, cols) = (contrib[0].rows(), contrib[0].cols());
    let mut z = Matrix::zeros(rows, cols);
    for (v, m) in contrib.iter().enumerate() {
        let m = match swap {
            Some((w, other)) if w == v => other,
            _ => m,
        };
        for i in 0..rows {
            for c in 0..cols {
                z.set(i, c, z.get(i, c) + m.get(i, c));
            }
        }
    }
    z
}

fn tournament<R: Rng>(pop: &[Individual], size: usize, rng: &mut R) -> usize {
    let mut best = rng.random_range(0..pop.len());
    for _ in 1..size {
        let i = rng.random_range(0..pop.len());
        if pop[i].fitness < pop[best].fitness {
            best = i;
        }
    }
    best
}

/// Indices of the best `count` individuals evaluated in the given mode.
fn elites(pop: &[Individual], team_mode: bool, count: usize) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..pop.len()).filter(|&i| pop[i].team_mode == team_mode).collect();
    idx.sort_by(|&a, &b| pop[a].fitness.total_cmp(&pop[b].fitness).then(a.cmp(&b)));
    idx.truncate(count);
    idx
}

fn check_data(data: &RunData<'_>, partition: &ViewPartition, classes: usize) -> Result<()> {
    if classes < 2 {
        return Err(Error::InvalidArgument(alloc::format!("need at least 2 classes, got {classes}")));
    }
    if data.train.is_empty() || data.val.is_empty() {
        return Err(Error::Dataset("train and validation splits must be non-empty".into()));
    }
    if data.y.len() != data.x.rows() {
        return Err(Error::Shape { expected: data.x.rows(), found: data.y.len() });
    }
    if partition.d != data.x.cols() {
        return Err(Error::Shape { expected: partition.d, found: data.x.cols() });
    }
    partition.validate()?;
    for &r in data.train.iter().chain(data.val) {
        if r >= data.x.rows() {
            return Err(Error::Shape { expected: data.x.rows(), found: r });
        }
        if data.y[r] >= classes {
            return Err(Error::LabelOutOfRange { label: data.y[r] as u32, classes: classes as u32 });
        }
    }
    Ok(())
}

/// [`run`], also returning the champion's training CE per generation.
///
/// The main generator (stream 0) draws mini-batches; population `v` owns
/// stream `v + 1` for evaluation modes, selection and variation, so results
/// depend on the seed alone.
pub fn run_traced(
    data: &RunData<'_>,
    partition: &ViewPartition,
    classes: usize,
    config: &GpConfig,
    seed: u64,
) -> Result<(RunRecord, RunTrace)> {
    config.validate()?;
    check_data(data, partition, classes)?;
    let eps = config.epsilon;
    let n_views = partition.len();
    let train_labels: Vec<usize> = data.train.iter().map(|&r| data.y[r]).collect();

    let mut main_rng = ChaCha8Rng::seed_from_u64(seed);
    let mut rngs: Vec<ChaCha8Rng> = (0..n_views)
        .map(|v| {
            let mut r = ChaCha8Rng::seed_from_u64(seed);
            r.set_stream(v as u64 + 1);
            r
        })
        .collect();
    let mut pops = init_populations(partition, classes, config, &mut rngs)?;

    // Initial incumbent: views join in ascending order, each taking the
    // individual that minimizes training CE together with the views before it.
    let mut champion: Vec<Vec<Program>> = Vec::with_capacity(n_views);
    let mut partial = Matrix::zeros(data.train.len(), classes);
    for pop in &pops {
        let mut best: Option<(f64, usize, Matrix)> = None;
        for (i, ind) in pop.iter().enumerate() {
            let own = eval_genes(&ind.genes, data.x, data.train, eps);
            let z = sum_views(&[partial.clone(), own.clone()], None);
            let ce = softmax_ce(&z, &train_labels)?;
            if best.as_ref().is_none_or(|b| ce < b.0) {
                best = Some((ce, i, z));
            }
        }
        let (_, i, z) = best.expect("populations are non-empty");
        champion.push(pop[i].genes.clone());
        partial = z;
    }
    let mut champion_ce = team_ce(&champion, data, data.train, &train_labels, eps)?;
    // Champion contributions on the training rows, per view.
    let mut contrib: Vec<Matrix> = champion.iter().map(|g| eval_genes(g, data.x, data.train, eps)).collect();
    let mut reference_ce = champion_ce;
    let mut stall = 0;
    let mut tune_budget = config.epochs;
    let batch_size = config.batch_size(data.train.len()).min(data.train.len());
    let n_team_elites = libm::ceil(config.elite_ensemble * config.pop_size as f64) as usize;
    let n_iso_elites = libm::ceil(config.elite_isolated * config.pop_size as f64) as usize;
    let mut trace = RunTrace::default();
    let mut generations = 0;

    while generations < config.max_generations {
        generations += 1;
        let batch: Vec<usize> = sample(&mut main_rng, data.train.len(), batch_size).iter().map(|i| data.train[i]).collect();
        let labels: Vec<usize> = batch.iter().map(|&r| data.y[r]).collect();

        // Partner contributions on the batch are shared by every individual.
        let partners: Vec<Matrix> = champion.iter().map(|g| eval_genes(g, data.x, &batch, eps)).collect();
        let mut total = Matrix::zeros(batch.len(), classes);
        for p in &partners {
            for i in 0..batch.len() {
                for c in 0..classes {
                    total.set(i, c, total.get(i, c) + p.get(i, c));
                }
            }
        }

        for (v, pop) in pops.iter_mut().enumerate() {
            let rng = &mut rngs[v];
            for ind in pop.iter_mut() {
                let own = eval_genes(&ind.genes, data.x, &batch, eps);
                ind.team_mode = rng.random_bool(config.ensemble_prob);
                let z = if ind.team_mode {
                    let mut z = total.clone();
                    for i in 0..batch.len() {
                        for c in 0..classes {
                            z.set(i, c, z.get(i, c) - partners[v].get(i, c) + own.get(i, c));
                        }
                    }
                    z
                } else {
                    own
                };
                ind.fitness = softmax_ce(&z, &labels)? + config.parsimony * ind.node_count() as f64 / 1000.0;
            }
        }

        // Offer team-mode individuals to the incumbent, one view at a time:
        // the elites, plus any that beat the incumbent on this batch.
        let champion_batch_ce = softmax_ce(&total, &labels)?;
        for (v, pop) in pops.iter().enumerate() {
            let bar = champion_batch_ce + config.parsimony * champion[v].iter().map(Program::node_count).sum::<usize>() as f64 / 1000.0;
            let ranked = elites(pop, true, pop.len());
            let offers = ranked.iter().enumerate().take_while(|&(rank, &i)| rank < n_team_elites.max(1) || pop[i].fitness < bar);
            for (_, &i) in offers {
                let genes = &pop[i].genes;
                if *genes == champion[v] {
                    continue;
                }
                let own = eval_genes(genes, data.x, data.train, eps);
                let ce = softmax_ce(&sum_views(&contrib, Some((v, &own))), &train_labels)?;
                if ce < champion_ce {
                    champion[v] = genes.clone();
                    contrib[v] = own;
                    champion_ce = ce;
                }
            }
        }

        let steps = config.tune_steps_per_generation.min(tune_budget);
        if steps > 0 {
            tune_budget -= steps;
            let mut tuned = champion.clone();
            tune_constants(&mut tuned, data.x, &batch, &labels, config.learning_rate, steps, eps)?;
            let tuned_ce = team_ce(&tuned, data, data.train, &train_labels, eps)?;
            if tuned_ce < champion_ce {
                champion = tuned;
                champion_ce = tuned_ce;
                contrib = champion.iter().map(|g| eval_genes(g, data.x, data.train, eps)).collect();
            }
        }
        trace.champion_train_ce.push(champion_ce);

        if champion_ce < reference_ce - config.stall_tolerance {
            reference_ce = champion_ce;
            stall = 0;
        } else {
            stall += 1;
        }
        if stall >= config.stall_generations {
            break;
        }
        if generations == config.max_generations {
            break;
        }

        for (v, pop) in pops.iter_mut().enumerate() {
            let rng = &mut rngs[v];
            let view = &partition.views[v];
            let mut next = Vec::with_capacity(config.pop_size);
            next.push(Individual::new(champion[v].clone(), v));
            for i in elites(pop, true, n_team_elites).into_iter().chain(elites(pop, false, n_iso_elites)) {
                if next.len() < config.pop_size && next.iter().all(|n| n.genes != pop[i].genes) {
                    next.push(Individual::new(pop[i].genes.clone(), v));
                }
            }
            while next.len() < config.pop_size {
                let a = tournament(pop, config.tournament_size, rng);
                let draw: f64 = rng.random();
                if draw < config.crossover_prob {
                    let b = tournament(pop, config.tournament_size, rng);
                    let mut ga = pop[a].genes.clone();
                    let mut gb = pop[b].genes.clone();
                    for c in 0..classes {
                        let (ea, eb) = subtree_crossover(ga[c].root(), gb[c].root(), rng, config.max_depth);
                        ga[c] = Program::new(ea);
                        gb[c] = Program::new(eb);
                    }
                    next.push(Individual::new(ga, v));
                    if next.len() < config.pop_size {
                        next.push(Individual::new(gb, v));
                    }
                } else if draw < config.crossover_prob + config.mutation_prob {
                    let c = rng.random_range(0..classes);
                    let mut g = pop[a].genes.clone();
                    g[c] = Program::new(point_mutate(g[c].root(), rng, view, config));
                    next.push(Individual::new(g, v));
                } else {
                    next.push(Individual::new(pop[a].genes.clone(), v));
                }
            }
            debug_assert!(next.iter().all(|ind| {
                let set = partition.view_set(v);
                ind.genes.iter().all(|g| g.depth() <= config.max_depth && g.uses_only(&set))
            }));
            *pop = next;
        }
    }

    let model = SurrogateModel::new(partition.clone(), champion, eps)?;
    let z = model.logits_rows(data.x, data.val)?;
    let pred: Vec<usize> = (0..z.rows()).map(|i| argmax(z.row(i))).collect();
    let truth: Vec<usize> = data.val.iter().map(|&r| data.y[r]).collect();
    let record = RunRecord::new(seed, macro_f1(&pred, &truth, classes), generations, config.digest(), model);
    Ok((record, trace))
}

/// First index of the maximum.
pub(crate) fn argmax(row: &[f64]) -> usize {
    let mut best = 0;
    for (i, v) in row.iter().enumerate() {
        if *v > row[best] {
            best = i;
        }
    }
    best
}
