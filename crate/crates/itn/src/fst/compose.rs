use super::{Arc, Fst, StateId, EPSILON};
use crate::{Error, Result};
use std::collections::HashMap;

/// Filter states of the epsilon-sequencing composition filter.
///
/// From the neutral state a paired epsilon move (epsilon output in `a`
/// matched with epsilon input in `b`) stays neutral; a lone epsilon move on
/// one side commits the path to that side until the next matching move.
/// This keeps exactly one representative of every class of equivalent
/// epsilon interleavings.
const FILTER_NEUTRAL: u8 = 0;
const FILTER_A_ONLY: u8 = 1;
const FILTER_B_ONLY: u8 = 2;

/// Weighted composition of `a` and `b` with epsilon handling.
///
/// The accepted relation of the result equals the relational composition of
/// the operands; path weights combine by addition of costs.
pub fn compose(a: &Fst, b: &Fst) -> Result<Fst> {
    if !std::sync::Arc::ptr_eq(a.osyms(), b.isyms()) && **a.osyms() != **b.isyms() {
        return Err(Error::SymbolTableMismatch);
    }

    let mut out = Fst::new(a.isyms().clone(), b.osyms().clone());
    let mut ids: HashMap<(StateId, StateId, u8), StateId> = HashMap::new();
    let start_key = (a.start(), b.start(), FILTER_NEUTRAL);
    ids.insert(start_key, 0);
    let mut queue = vec![start_key];

    while let Some(key @ (sa, sb, filt)) = queue.pop() {
        let cur = ids[&key];
        if let (Some(wa), Some(wb)) = (a.final_weight(sa), b.final_weight(sb)) {
            out.set_final(cur, wa + wb);
        }

        let push = |out: &mut Fst,
                        ids: &mut HashMap<(StateId, StateId, u8), StateId>,
                        queue: &mut Vec<(StateId, StateId, u8)>,
                        ilabel,
                        olabel,
                        weight,
                        next_key| {
            let next = *ids.entry(next_key).or_insert_with(|| {
                queue.push(next_key);
                out.add_state()
            });
            out.add_arc(cur, Arc::new(ilabel, olabel, weight, next));
        };

        for aa in a.arcs(sa) {
            if aa.olabel == EPSILON {
                // A moves alone on an epsilon output.
                if filt != FILTER_B_ONLY {
                    push(
                        &mut out,
                        &mut ids,
                        &mut queue,
                        aa.ilabel,
                        EPSILON,
                        aa.weight,
                        (aa.nextstate, sb, FILTER_A_ONLY),
                    );
                }
                // Paired epsilon move, only from the neutral filter state.
                if filt == FILTER_NEUTRAL {
                    for ba in b.arcs(sb) {
                        if ba.ilabel == EPSILON {
                            push(
                                &mut out,
                                &mut ids,
                                &mut queue,
                                aa.ilabel,
                                ba.olabel,
                                aa.weight + ba.weight,
                                (aa.nextstate, ba.nextstate, FILTER_NEUTRAL),
                            );
                        }
                    }
                }
            } else {
                for ba in b.arcs(sb) {
                    if ba.ilabel == aa.olabel {
                        push(
                            &mut out,
                            &mut ids,
                            &mut queue,
                            aa.ilabel,
                            ba.olabel,
                            aa.weight + ba.weight,
                            (aa.nextstate, ba.nextstate, FILTER_NEUTRAL),
                        );
                    }
                }
            }
        }
        // B moves alone on an epsilon input.
        if filt != FILTER_A_ONLY {
            for ba in b.arcs(sb) {
                if ba.ilabel == EPSILON {
                    push(
                        &mut out,
                        &mut ids,
                        &mut queue,
                        EPSILON,
                        ba.olabel,
                        ba.weight,
                        (sa, ba.nextstate, FILTER_B_ONLY),
                    );
                }
            }
        }
    }
    Ok(out)
}
