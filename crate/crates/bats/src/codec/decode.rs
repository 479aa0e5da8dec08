//! Peeling decoders over batches: belief propagation, inactivation, and
//! layered decoding.
//!
//! All three share one engine. A batch is *consumed* once the rank of
//! its remaining active coefficient rows equals the number of remaining
//! active unknowns; consumption expresses those unknowns as affine
//! combinations of inactivated symbols (plain constants under pure BP)
//! and turns surplus batch equations into linear constraints on the
//! inactivated symbols. Inactivation decoding inactivates on stall until
//! every batch is consumed; constraints are solved only when their rank
//! reaches the inactivation count, never partially.

use std::collections::VecDeque;

use thiserror::Error;

use crate::gf::{axpy, FieldMatrix, Gf256};

use super::Batch;

/// Outcome of a decode run.
#[derive(Debug, Clone, PartialEq)]
pub struct DecodeResult {
    /// Per-variable: value fully recovered.
    pub decoded_mask: Vec<bool>,
    /// Recovered symbol content for decoded variables.
    pub decoded_symbols: Vec<Option<Vec<Gf256>>>,
    /// Per-batch: the rank condition held at some point during decoding.
    pub cn_indicator: Vec<bool>,
    /// Per-variable decodability indicator; equals `decoded_mask`.
    pub vn_indicator: Vec<bool>,
    /// Number of symbols inactivated during the run.
    pub inactivation_count: usize,
    /// Decoded variables divided by K.
    pub decoding_rate: f64,
}

impl DecodeResult {
    pub fn decoded_count(&self) -> usize {
        self.decoded_mask.iter().filter(|&&d| d).count()
    }

    pub fn decoded_set(&self) -> Vec<usize> {
        (0..self.decoded_mask.len())
            .filter(|&k| self.decoded_mask[k])
            .collect()
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LayeredError {
    #[error("batch {0} carries no layer index")]
    MissingLayer(usize),
    #[error("layer {layer} holds {count} batches but the base graph has only {m} rows")]
    OversizedLayer { layer: usize, count: usize, m: usize },
}

/// Layered decode outcome: the usual result plus the buffer-accounting
/// counter that models per-layer payload release.
#[derive(Debug, Clone, PartialEq)]
pub struct LayeredDecode {
    pub result: DecodeResult,
    /// Peak number of payload columns held at once; bounded by the
    /// layer width rather than the full batch count.
    pub peak_retained_payload_cols: usize,
}

/// An affine expression `constant + sum_j lambda[j] * z_j` over the
/// inactivated symbols. `lambda` may be shorter than the current slot
/// count; missing entries are zero.
#[derive(Debug, Clone)]
struct Expr {
    constant: Vec<Gf256>,
    lambda: Vec<Gf256>,
}

impl Expr {
    fn is_numeric(&self) -> bool {
        self.lambda.iter().all(|l| l.is_zero())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum VarState {
    Unknown,
    Inactive(usize),
    Resolved,
}

struct WorkBatch {
    /// Active variable per coefficient row.
    vars: Vec<usize>,
    coeff: FieldMatrix,
    /// Accumulated rows for inactivated symbols: (slot, row of length m).
    icoeff: Vec<(usize, Vec<Gf256>)>,
    payload: FieldMatrix,
    payload_cols: usize,
    arrived: bool,
    consumed: bool,
}

struct Engine {
    k: usize,
    pk: usize,
    batches: Vec<WorkBatch>,
    var_state: Vec<VarState>,
    exprs: Vec<Option<Expr>>,
    /// Original adjacency: variable -> batches containing it.
    var_batches: Vec<Vec<usize>>,
    /// Inactivation order: slot -> variable.
    slot_var: Vec<usize>,
    constraint_lhs: Vec<Vec<Gf256>>,
    constraint_rhs: Vec<Vec<Gf256>>,
    cn_indicator: Vec<bool>,
    queue: VecDeque<usize>,
    in_queue: Vec<bool>,
    total_inactivated: usize,
}

impl Engine {
    fn new(batches: &[Batch], k: usize) -> Engine {
        let pk = batches.first().map_or(0, |b| b.payload.rows());
        let mut var_batches = vec![Vec::new(); k];
        let mut work = Vec::with_capacity(batches.len());
        for (i, b) in batches.iter().enumerate() {
            assert_eq!(b.payload.rows(), pk, "batches disagree on symbol size");
            assert_eq!(b.coeff.rows(), b.degree());
            assert_eq!(b.payload.cols(), b.coeff.cols());
            for &v in &b.variable_indices {
                assert!(v < k, "variable index out of range");
                var_batches[v].push(i);
            }
            work.push(WorkBatch {
                vars: b.variable_indices.clone(),
                coeff: b.coeff.clone(),
                icoeff: Vec::new(),
                payload: b.payload.clone(),
                payload_cols: b.payload.cols(),
                arrived: false,
                consumed: false,
            });
        }
        let n = batches.len();
        Engine {
            k,
            pk,
            batches: work,
            var_state: vec![VarState::Unknown; k],
            exprs: vec![None; k],
            var_batches,
            slot_var: Vec::new(),
            constraint_lhs: Vec::new(),
            constraint_rhs: Vec::new(),
            cn_indicator: vec![false; n],
            queue: VecDeque::new(),
            in_queue: vec![false; n],
            total_inactivated: 0,
        }
    }

    fn enqueue(&mut self, b: usize) {
        if !self.in_queue[b] && !self.batches[b].consumed {
            self.in_queue[b] = true;
            self.queue.push_back(b);
        }
    }

    /// Make a batch visible to the decoder, folding in everything known
    /// about its variables so far.
    fn arrive(&mut self, b: usize) {
        self.batches[b].arrived = true;
        let mut row_idx = 0;
        while row_idx < self.batches[b].vars.len() {
            let v = self.batches[b].vars[row_idx];
            match self.var_state[v] {
                VarState::Unknown => row_idx += 1,
                VarState::Inactive(slot) => {
                    let row = self.take_row(b, row_idx);
                    add_icoeff(&mut self.batches[b].icoeff, slot, &row);
                }
                VarState::Resolved => {
                    self.substitute_row(b, row_idx);
                }
            }
        }
        self.enqueue(b);
    }

    /// Remove an active row, returning its coefficients.
    fn take_row(&mut self, b: usize, row_idx: usize) -> Vec<Gf256> {
        let batch = &mut self.batches[b];
        let row = batch.coeff.row(row_idx).to_vec();
        batch.coeff.remove_row(row_idx);
        batch.vars.remove(row_idx);
        row
    }

    /// Fold the resolved expression of the variable at `row_idx` into the
    /// batch payload and inactive rows.
    fn substitute_row(&mut self, b: usize, row_idx: usize) {
        let v = self.batches[b].vars[row_idx];
        let row = self.take_row(b, row_idx);
        let expr = self.exprs[v].take().expect("resolved variable has an expression");
        {
            let batch = &mut self.batches[b];
            for p in 0..self.pk {
                let c = expr.constant[p];
                if !c.is_zero() {
                    axpy(batch.payload.row_mut(p), &row, c);
                }
            }
            for (slot, &l) in expr.lambda.iter().enumerate() {
                if !l.is_zero() {
                    let mut scaled = row.clone();
                    crate::gf::scale(&mut scaled, l);
                    add_icoeff(&mut batch.icoeff, slot, &scaled);
                }
            }
        }
        self.exprs[v] = Some(expr);
    }

    fn process_queue(&mut self) {
        while let Some(b) = self.queue.pop_front() {
            self.in_queue[b] = false;
            self.try_consume(b);
        }
    }

    fn try_consume(&mut self, b: usize) {
        let batch = &self.batches[b];
        if batch.consumed || !batch.arrived {
            return;
        }
        let actives = batch.vars.len();
        if actives > batch.coeff.cols() {
            return;
        }
        if actives > 0 && batch.coeff.rank() != actives {
            return;
        }
        self.consume(b);
    }

    /// The rank condition holds: solve the batch for its active unknowns
    /// as affine expressions over the inactivated symbols and harvest
    /// surplus equations as constraints.
    fn consume(&mut self, b: usize) {
        self.batches[b].consumed = true;
        self.cn_indicator[b] = true;

        let (mut aug, actives, slots) = {
            let batch = &mut self.batches[b];
            let actives = std::mem::take(&mut batch.vars);
            let coeff = std::mem::replace(&mut batch.coeff, FieldMatrix::zeros(0, 0));
            let icoeff = std::mem::take(&mut batch.icoeff);
            let payload = std::mem::replace(&mut batch.payload, FieldMatrix::zeros(0, 0));
            let m = coeff.cols();
            let n_act = actives.len();
            let slots: Vec<usize> = icoeff.iter().map(|(s, _)| *s).collect();
            // Transposed augmented system: one row per received column,
            // columns laid out [actives | inactive slots | payload].
            let width = n_act + slots.len() + self.pk;
            let mut aug = FieldMatrix::zeros(m, width);
            for c in 0..m {
                for j in 0..n_act {
                    aug.set(c, j, coeff.get(j, c));
                }
                for (t, (_, row)) in icoeff.iter().enumerate() {
                    aug.set(c, n_act + t, row[c]);
                }
                for p in 0..self.pk {
                    aug.set(c, n_act + slots.len() + p, payload.get(p, c));
                }
            }
            (aug, actives, slots)
        };
        let n_act = actives.len();
        let pivots = aug.echelonize(n_act);
        debug_assert_eq!(pivots.len(), n_act, "rank condition violated in consume");

        let mut resolved = Vec::with_capacity(n_act);
        for (r, &col) in pivots.iter().enumerate() {
            debug_assert_eq!(col, r);
            let v = actives[col];
            let row = aug.row(r);
            let lambda_end = n_act + slots.len();
            let mut lambda = Vec::new();
            for (t, &slot) in slots.iter().enumerate() {
                let l = row[n_act + t];
                if !l.is_zero() {
                    if lambda.len() <= slot {
                        lambda.resize(slot + 1, Gf256::ZERO);
                    }
                    lambda[slot] = l;
                }
            }
            let constant = row[lambda_end..].to_vec();
            self.exprs[v] = Some(Expr { constant, lambda });
            resolved.push(v);
        }

        // Surplus rows constrain the inactivated symbols.
        for r in n_act..aug.rows() {
            let row = aug.row(r);
            let slot_part = &row[n_act..n_act + slots.len()];
            if slot_part.iter().all(|v| v.is_zero()) {
                debug_assert!(
                    row[n_act + slots.len()..].iter().all(|v| v.is_zero()),
                    "inconsistent batch system"
                );
                continue;
            }
            let mut lhs = Vec::new();
            for (t, &slot) in slots.iter().enumerate() {
                let l = slot_part[t];
                if !l.is_zero() {
                    if lhs.len() <= slot {
                        lhs.resize(slot + 1, Gf256::ZERO);
                    }
                    lhs[slot] = l;
                }
            }
            self.constraint_lhs.push(lhs);
            self.constraint_rhs.push(row[n_act + slots.len()..].to_vec());
        }

        for v in resolved {
            self.var_state[v] = VarState::Resolved;
            for nb_pos in 0..self.var_batches[v].len() {
                let nb = self.var_batches[v][nb_pos];
                if nb == b {
                    continue;
                }
                let batch = &self.batches[nb];
                if !batch.arrived || batch.consumed {
                    continue;
                }
                if let Some(row_idx) = self.batches[nb].vars.iter().position(|&x| x == v) {
                    self.substitute_row(nb, row_idx);
                    self.enqueue(nb);
                }
            }
        }
    }

    /// Inactivate a variable: move its rows out of the active blocks of
    /// every arrived batch.
    fn inactivate(&mut self, v: usize) {
        debug_assert_eq!(self.var_state[v], VarState::Unknown);
        let slot = self.slot_var.len();
        self.slot_var.push(v);
        self.var_state[v] = VarState::Inactive(slot);
        self.total_inactivated += 1;
        for nb_pos in 0..self.var_batches[v].len() {
            let nb = self.var_batches[v][nb_pos];
            let batch = &self.batches[nb];
            if !batch.arrived || batch.consumed {
                continue;
            }
            if let Some(row_idx) = self.batches[nb].vars.iter().position(|&x| x == v) {
                let row = self.take_row(nb, row_idx);
                add_icoeff(&mut self.batches[nb].icoeff, slot, &row);
                self.enqueue(nb);
            }
        }
    }

    /// The stall heuristic: the unknown variable with the most arrived,
    /// unconsumed neighbor batches; ties go to the lowest index. Returns
    /// None when every arrived batch is consumed.
    fn pick_inactivation_target(&self) -> Option<usize> {
        let mut best: Option<(usize, usize)> = None; // (count, var)
        for v in 0..self.k {
            if self.var_state[v] != VarState::Unknown {
                continue;
            }
            let count = self.var_batches[v]
                .iter()
                .filter(|&&b| self.batches[b].arrived && !self.batches[b].consumed)
                .count();
            if count == 0 {
                continue;
            }
            let better = match best {
                None => true,
                Some((c, _)) => count > c,
            };
            if better {
                best = Some((count, v));
            }
        }
        best.map(|(_, v)| v)
    }

    fn has_unconsumed_arrived(&self) -> bool {
        self.batches.iter().any(|b| b.arrived && !b.consumed)
    }

    /// Solve the accumulated constraints if and only if their rank equals
    /// the inactivation count; on success every affine expression becomes
    /// numeric and the slot bookkeeping resets.
    fn try_solve_constraints(&mut self) -> bool {
        let n_slots = self.slot_var.len();
        if n_slots == 0 {
            return true;
        }
        let rows = self.constraint_lhs.len();
        let mut lhs = FieldMatrix::zeros(rows, n_slots);
        let mut rhs = FieldMatrix::zeros(rows, self.pk);
        for (r, (l, y)) in self
            .constraint_lhs
            .iter()
            .zip(&self.constraint_rhs)
            .enumerate()
        {
            for (slot, &c) in l.iter().enumerate() {
                lhs.set(r, slot, c);
            }
            rhs.row_mut(r).copy_from_slice(y);
        }
        if lhs.rank() != n_slots {
            return false;
        }
        let z = lhs.solve(&rhs).expect("full-rank constraint system");
        // Materialize every expression.
        for v in 0..self.k {
            if let Some(expr) = self.exprs[v].as_mut() {
                for (slot, &l) in expr.lambda.iter().enumerate() {
                    if !l.is_zero() {
                        for p in 0..self.pk {
                            let delta = l * z.get(slot, p);
                            expr.constant[p] += delta;
                        }
                    }
                }
                expr.lambda.clear();
            }
        }
        for (slot, &v) in self.slot_var.clone().iter().enumerate() {
            self.exprs[v] = Some(Expr {
                constant: (0..self.pk).map(|p| z.get(slot, p)).collect(),
                lambda: Vec::new(),
            });
            self.var_state[v] = VarState::Resolved;
        }
        self.slot_var.clear();
        self.constraint_lhs.clear();
        self.constraint_rhs.clear();
        true
    }

    fn into_result(self) -> DecodeResult {
        let k = self.k;
        let mut decoded_mask = vec![false; k];
        let mut decoded_symbols = vec![None; k];
        for v in 0..k {
            if let Some(expr) = &self.exprs[v] {
                if expr.is_numeric() {
                    decoded_mask[v] = true;
                    decoded_symbols[v] = Some(expr.constant.clone());
                }
            }
        }
        let decoded = decoded_mask.iter().filter(|&&d| d).count();
        DecodeResult {
            vn_indicator: decoded_mask.clone(),
            decoded_mask,
            decoded_symbols,
            cn_indicator: self.cn_indicator,
            inactivation_count: self.total_inactivated,
            decoding_rate: if k == 0 { 0.0 } else { decoded as f64 / k as f64 },
        }
    }
}

fn add_icoeff(icoeff: &mut Vec<(usize, Vec<Gf256>)>, slot: usize, row: &[Gf256]) {
    if let Some((_, existing)) = icoeff.iter_mut().find(|(s, _)| *s == slot) {
        for (d, x) in existing.iter_mut().zip(row) {
            *d += *x;
        }
    } else {
        let pos = icoeff.partition_point(|(s, _)| *s < slot);
        icoeff.insert(pos, (slot, row.to_vec()));
    }
}

/// Belief-propagation decoding: repeatedly solve every batch whose rank
/// equals its remaining degree and substitute the recovered symbols into
/// its neighbors, until nothing changes.
pub fn bp_decode(batches: &[Batch], k: usize) -> DecodeResult {
    let mut engine = Engine::new(batches, k);
    for b in 0..batches.len() {
        engine.arrive(b);
    }
    engine.process_queue();
    engine.into_result()
}

/// Inactivation decoding: BP, plus one inactivated symbol per stall until
/// every batch is consumed; the collected constraints are solved at the
/// end when their rank equals the inactivation count.
pub fn inactivation_decode(batches: &[Batch], k: usize) -> DecodeResult {
    let mut engine = Engine::new(batches, k);
    for b in 0..batches.len() {
        engine.arrive(b);
    }
    engine.process_queue();
    while engine.has_unconsumed_arrived() {
        let v = engine
            .pick_inactivation_target()
            .expect("an unconsumed batch always has an unknown active variable");
        engine.inactivate(v);
        engine.process_queue();
    }
    engine.try_solve_constraints();
    engine.into_result()
}

/// Layered decoding: consume the batches one cyclic-shift layer at a
/// time, inactivating whatever the layer leaves stalled, and release the
/// layer's payload buffers before moving on. The constraint system is
/// solved whenever its rank catches up with the inactivation count.
pub fn layered_decode(
    batches: &[Batch],
    k: usize,
    m: usize,
) -> Result<LayeredDecode, LayeredError> {
    let mut layers: Vec<(usize, Vec<usize>)> = Vec::new();
    for (i, b) in batches.iter().enumerate() {
        let layer = b.layer.ok_or(LayeredError::MissingLayer(i))?;
        match layers.binary_search_by_key(&layer, |&(l, _)| l) {
            Ok(pos) => layers[pos].1.push(i),
            Err(pos) => layers.insert(pos, (layer, vec![i])),
        }
    }
    for (layer, members) in &layers {
        if members.len() > m {
            return Err(LayeredError::OversizedLayer {
                layer: *layer,
                count: members.len(),
                m,
            });
        }
    }

    let mut engine = Engine::new(batches, k);
    let mut peak = 0usize;
    let mut retained = 0usize;
    for (_, members) in &layers {
        for &b in members {
            retained += engine.batches[b].payload_cols;
            engine.arrive(b);
        }
        peak = peak.max(retained);
        engine.process_queue();
        while engine.has_unconsumed_arrived() {
            let v = engine
                .pick_inactivation_target()
                .expect("an unconsumed batch always has an unknown active variable");
            engine.inactivate(v);
            engine.process_queue();
        }
        engine.try_solve_constraints();
        for &b in members {
            retained -= engine.batches[b].payload_cols;
        }
    }
    Ok(LayeredDecode {
        result: engine.into_result(),
        peak_retained_payload_cols: peak,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::codec::{encode, CoefficientMode, SourceBlock};
    use crate::graph;
    use rand::seq::SliceRandom;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha12Rng;

    fn assert_decoded_matches_source(result: &DecodeResult, src: &SourceBlock) {
        for v in 0..src.k() {
            if result.decoded_mask[v] {
                assert_eq!(
                    result.decoded_symbols[v].as_deref(),
                    Some(src.symbol(v)),
                    "variable {v} decoded to a wrong value"
                );
            } else {
                assert!(result.decoded_symbols[v].is_none());
            }
        }
    }

    #[test]
    fn bp_empty_input() {
        let r = bp_decode(&[], 5);
        assert_eq!(r.decoding_rate, 0.0);
        assert_eq!(r.decoded_count(), 0);
        assert!(r.cn_indicator.is_empty());
    }

    #[test]
    fn bp_single_full_rank_batch() {
        let mut rng = ChaCha12Rng::seed_from_u64(1);
        let t = graph::tanner_from_rows(8, vec![vec![1, 4, 6]]).unwrap();
        let src = SourceBlock::random(8, 2, &mut rng);
        loop {
            let batches = encode(&src, &t, 4, CoefficientMode::UniformAll, &mut rng);
            if !batches[0].decodable() {
                continue;
            }
            let r = bp_decode(&batches, 8);
            assert_eq!(r.decoded_set(), vec![1, 4, 6]);
            assert!(r.cn_indicator[0]);
            assert_eq!(r.inactivation_count, 0);
            assert_decoded_matches_source(&r, &src);
            break;
        }
    }

    #[test]
    fn bp_lossless_round_trip_matches_peeling_oracle() {
        // K=8, M=2, 6 batches, no loss: the decoded set must equal the
        // fixpoint of an independent straightforward peeling pass.
        for seed in 0..40u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(900 + seed);
            let psi = graph::DegreeDistribution::new(vec![0.3, 0.4, 0.3]).unwrap();
            let t = graph::random_tanner(&psi, 8, 6, &mut rng);
            let src = SourceBlock::random(8, 3, &mut rng);
            let batches = encode(&src, &t, 2, CoefficientMode::UniformAll, &mut rng);
            let r = bp_decode(&batches, 8);
            let expect = peeling_oracle(&batches, 8);
            assert_eq!(r.decoded_set(), expect, "seed {seed}");
            assert_decoded_matches_source(&r, &src);
        }
    }

    /// Simple-minded reference peeling: repeatedly scan for a batch whose
    /// residual coefficient rows are full rank over the still-unknown
    /// variables, mark those variables known, and loop. Tracks no values,
    /// only the decoded set.
    fn peeling_oracle(batches: &[Batch], k: usize) -> Vec<usize> {
        let mut known = vec![false; k];
        loop {
            let mut progress = false;
            for b in batches {
                let unknown_rows: Vec<usize> = (0..b.degree())
                    .filter(|&j| !known[b.variable_indices[j]])
                    .collect();
                if unknown_rows.is_empty() {
                    continue;
                }
                let mut sub = FieldMatrix::zeros(unknown_rows.len(), b.coeff.cols());
                for (r, &j) in unknown_rows.iter().enumerate() {
                    sub.row_mut(r).copy_from_slice(b.coeff.row(j));
                }
                if sub.rank() == unknown_rows.len() {
                    for &j in &unknown_rows {
                        known[b.variable_indices[j]] = true;
                    }
                    progress = true;
                }
            }
            if !progress {
                break;
            }
        }
        (0..k).filter(|&v| known[v]).collect()
    }

    #[test]
    fn bp_order_independence() {
        let mut shuffler = ChaCha12Rng::seed_from_u64(77);
        for seed in 0..10u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(500 + seed);
            let psi = graph::DegreeDistribution::new(vec![0.2, 0.5, 0.3]).unwrap();
            let t = graph::random_tanner(&psi, 10, 7, &mut rng);
            let src = SourceBlock::random(10, 2, &mut rng);
            let mut batches = encode(&src, &t, 2, CoefficientMode::UniformAll, &mut rng);
            // Degrade a couple of batches so the instance is nontrivial.
            batches[0].erase_columns(&[true, false]);
            batches[3].erase_columns(&[false, false]);
            let baseline = bp_decode(&batches, 10).decoded_set();
            for _ in 0..8 {
                let mut shuffled = batches.clone();
                shuffled.shuffle(&mut shuffler);
                assert_eq!(bp_decode(&shuffled, 10).decoded_set(), baseline);
            }
        }
    }

    #[test]
    fn bp_monotone_in_batches() {
        for seed in 0..10u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(300 + seed);
            let psi = graph::DegreeDistribution::new(vec![0.3, 0.5, 0.2]).unwrap();
            let t = graph::random_tanner(&psi, 12, 9, &mut rng);
            let src = SourceBlock::random(12, 1, &mut rng);
            let batches = encode(&src, &t, 2, CoefficientMode::UniformAll, &mut rng);
            let partial = bp_decode(&batches[..5], 12);
            let full = bp_decode(&batches, 12);
            for v in 0..12 {
                assert!(!partial.decoded_mask[v] || full.decoded_mask[v]);
            }
        }
    }

    #[test]
    fn bp_fixpoint_when_decoded_symbols_are_fed_back() {
        let mut rng = ChaCha12Rng::seed_from_u64(41);
        let psi = graph::DegreeDistribution::new(vec![0.4, 0.6]).unwrap();
        let t = graph::random_tanner(&psi, 10, 6, &mut rng);
        let src = SourceBlock::random(10, 2, &mut rng);
        let batches = encode(&src, &t, 2, CoefficientMode::UniformAll, &mut rng);
        let first = bp_decode(&batches, 10);
        // Append each decoded symbol as a degree-1 identity batch.
        let mut augmented = batches.clone();
        for v in first.decoded_set() {
            let payload = FieldMatrix::from_rows(
                src.symbol(v).iter().map(|&x| vec![x]).collect(),
            )
            .unwrap();
            augmented.push(Batch {
                id: augmented.len(),
                variable_indices: vec![v],
                generator: FieldMatrix::identity(1),
                coeff: FieldMatrix::identity(1),
                payload,
                layer: None,
            });
        }
        let second = bp_decode(&augmented, 10);
        assert_eq!(second.decoded_set(), first.decoded_set());
    }

    #[test]
    fn substitution_keeps_systems_consistent() {
        // After decoding, every batch equation must still hold for the
        // recovered values: residual payload equals remaining-B * coeff.
        let mut rng = ChaCha12Rng::seed_from_u64(42);
        let psi = graph::DegreeDistribution::new(vec![0.0, 0.5, 0.5]).unwrap();
        let t = graph::random_tanner(&psi, 9, 7, &mut rng);
        let src = SourceBlock::random(9, 2, &mut rng);
        let batches = encode(&src, &t, 3, CoefficientMode::UniformAll, &mut rng);
        let r = bp_decode(&batches, 9);
        for b in &batches {
            let b_sel = src.submatrix(&b.variable_indices);
            assert_eq!(b_sel.mul(&b.coeff).unwrap(), b.payload);
        }
        assert_decoded_matches_source(&r, &src);
    }

    #[test]
    fn degree_zero_batches_are_discarded_but_flagged() {
        let empty = Batch {
            id: 0,
            variable_indices: vec![],
            generator: FieldMatrix::zeros(0, 2),
            coeff: FieldMatrix::zeros(0, 2),
            payload: FieldMatrix::zeros(1, 2),
            layer: None,
        };
        let r = bp_decode(&[empty], 4);
        assert!(r.cn_indicator[0]);
        assert_eq!(r.decoded_count(), 0);
    }

    #[test]
    fn inactivation_equals_bp_when_bp_suffices() {
        let mut rng = ChaCha12Rng::seed_from_u64(9);
        let psi = graph::DegreeDistribution::new(vec![0.5, 0.5]).unwrap();
        let t = graph::random_tanner(&psi, 8, 10, &mut rng);
        let src = SourceBlock::random(8, 2, &mut rng);
        let batches = encode(&src, &t, 2, CoefficientMode::UniformAll, &mut rng);
        let bp = bp_decode(&batches, 8);
        if bp.decoding_rate == 1.0 {
            let inact = inactivation_decode(&batches, 8);
            assert_eq!(inact, bp);
            assert_eq!(inact.inactivation_count, 0);
        }
    }

    #[test]
    fn one_inactivation_unlocks_two_stalled_batches() {
        // Two degree-2 batches over {v0, v1}, each with a single received
        // column, so BP stalls immediately; the batches are jointly full
        // rank, so one inactivation plus the constraint solve recovers
        // both symbols.
        let src = SourceBlock::from_symbols(vec![vec![Gf256(0x21)], vec![Gf256(0x3c)]]);
        let make = |id: usize, g: [u8; 2]| {
            let coeff = FieldMatrix::from_bytes(2, 1, &g);
            let payload = src
                .submatrix(&[0, 1])
                .mul(&coeff)
                .unwrap();
            Batch {
                id,
                variable_indices: vec![0, 1],
                generator: coeff.clone(),
                coeff,
                payload,
                layer: None,
            }
        };
        let batches = vec![make(0, [1, 1]), make(1, [1, 2])];
        let bp = bp_decode(&batches, 2);
        assert_eq!(bp.decoded_count(), 0);
        let inact = inactivation_decode(&batches, 2);
        assert_eq!(inact.inactivation_count, 1);
        assert_eq!(inact.decoded_count(), 2);
        assert_decoded_matches_source(&inact, &src);
    }

    #[test]
    fn inactivation_supersets_bp() {
        for seed in 0..30u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(1000 + seed);
            let psi = graph::DegreeDistribution::new(vec![0.1, 0.3, 0.4, 0.2]).unwrap();
            let t = graph::random_tanner(&psi, 12, 8, &mut rng);
            let src = SourceBlock::random(12, 2, &mut rng);
            let mut batches = encode(&src, &t, 3, CoefficientMode::UniformAll, &mut rng);
            for b in batches.iter_mut() {
                let keep: Vec<bool> = (0..b.received()).map(|_| rng.gen_bool(0.7)).collect();
                b.erase_columns(&keep);
            }
            let bp = bp_decode(&batches, 12);
            let inact = inactivation_decode(&batches, 12);
            for v in 0..12 {
                assert!(!bp.decoded_mask[v] || inact.decoded_mask[v], "seed {seed}");
            }
            assert_decoded_matches_source(&inact, &src);
        }
    }

    #[test]
    fn layered_requires_layer_indices() {
        let batch = Batch {
            id: 0,
            variable_indices: vec![0],
            generator: FieldMatrix::identity(1),
            coeff: FieldMatrix::identity(1),
            payload: FieldMatrix::zeros(1, 1),
            layer: None,
        };
        assert_eq!(
            layered_decode(&[batch], 2, 4).unwrap_err(),
            LayeredError::MissingLayer(0)
        );
    }

    #[test]
    fn layered_single_layer_matches_inactivation() {
        for seed in 0..30u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(2000 + seed);
            let degrees = vec![2, 3, 2];
            let base =
                graph::design_base_graph(&degrees, 8, graph::TieBreak::Random, &mut rng)
                    .unwrap();
            let t = graph::expand_cs(&base, 3);
            let src = SourceBlock::random(8, 2, &mut rng);
            let mut batches = encode(&src, &t, 3, CoefficientMode::UniformAll, &mut rng);
            for b in batches.iter_mut() {
                let keep: Vec<bool> = (0..b.received()).map(|_| rng.gen_bool(0.8)).collect();
                b.erase_columns(&keep);
            }
            let inact = inactivation_decode(&batches, 8);
            let layered = layered_decode(&batches, 8, 3).unwrap();
            assert_eq!(layered.result.decoded_set(), inact.decoded_set(), "seed {seed}");
            assert_decoded_matches_source(&layered.result, &src);
        }
    }

    #[test]
    fn layered_lossless_full_rank_decodes_without_inactivation() {
        let mut rng = ChaCha12Rng::seed_from_u64(3030);
        let degrees = vec![2, 2, 3];
        let base =
            graph::design_base_graph(&degrees, 9, graph::TieBreak::Random, &mut rng).unwrap();
        let t = graph::expand_cs(&base, 9);
        let src = SourceBlock::random(9, 2, &mut rng);
        loop {
            let batches = encode(&src, &t, 4, CoefficientMode::UniformAll, &mut rng);
            if !batches.iter().all(|b| b.decodable()) {
                continue;
            }
            let out = layered_decode(&batches, 9, 3).unwrap();
            assert_eq!(out.result.inactivation_count, 0);
            assert_eq!(out.result.decoding_rate, 1.0);
            assert_decoded_matches_source(&out.result, &src);
            // Payload buffers never exceed one layer's worth of columns.
            assert!(out.peak_retained_payload_cols <= 3 * 4);
            break;
        }
    }

    #[test]
    fn layered_cross_decoder_comparison() {
        // K=16, m=4, N=12: whenever the plain inactivation decoder's
        // constraint system resolves (all-or-nothing), the layered decoder
        // recovers the same set.
        let mut agreements = 0;
        for seed in 0..100u64 {
            let mut rng = ChaCha12Rng::seed_from_u64(4000 + seed);
            let degrees = vec![3, 4, 5, 4];
            let base =
                graph::design_base_graph(&degrees, 16, graph::TieBreak::Random, &mut rng)
                    .unwrap();
            let t = graph::expand_cs(&base, 12);
            let src = SourceBlock::random(16, 1, &mut rng);
            let mut batches = encode(&src, &t, 3, CoefficientMode::UniformAll, &mut rng);
            for b in batches.iter_mut() {
                let keep: Vec<bool> = (0..b.received()).map(|_| rng.gen_bool(0.85)).collect();
                b.erase_columns(&keep);
            }
            let inact = inactivation_decode(&batches, 16);
            let solved_everything_it_touched = inact.decoded_count()
                == (0..16)
                    .filter(|&v| batches.iter().any(|b| b.variable_indices.contains(&v)))
                    .count();
            let layered = layered_decode(&batches, 16, 4).unwrap();
            if solved_everything_it_touched {
                assert_eq!(
                    layered.result.decoded_set(),
                    inact.decoded_set(),
                    "seed {seed}"
                );
                agreements += 1;
            }
            assert_decoded_matches_source(&layered.result, &src);
            assert_decoded_matches_source(&inact, &src);
        }
        assert!(agreements > 10, "comparison never exercised: {agreements}");
    }
}
