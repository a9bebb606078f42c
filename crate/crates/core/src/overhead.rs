//! Structural overhead of obfuscation and lockout hardening.

use serde::Serialize;

use crate::design::{Design, FuOp, MuxSelect, NodeKind};

#[derive(Debug, Clone, Copy, Default, PartialEq, Eq, Serialize)]
pub struct StructureCounts {
    pub key_muxes: usize,
    /// Primary plus shadow comparators (2-input XORs on the key bits).
    pub comparators: usize,
    pub shadow_comparators: usize,
    pub edu_cells: usize,
    pub mask_xors: usize,
    pub counters: usize,
    pub checkers: usize,
    pub states: usize,
    pub nodes: usize,
    pub nets: usize,
}

impl StructureCounts {
    pub fn of(d: &Design) -> Self {
        let count = |f: &dyn Fn(&NodeKind) -> bool| d.count_nodes(f);
        let mask_nets: Vec<&str> = d
            .nodes
            .iter()
            .filter(|n| matches!(n.kind, NodeKind::MaskBit { .. }))
            .filter_map(|n| d.output_net_of(&n.id))
            .map(|n| n.id.as_str())
            .collect();
        StructureCounts {
            key_muxes: count(&|k| matches!(k, NodeKind::Mux { select: MuxSelect::Net(_), .. })),
            comparators: count(&|k| matches!(k, NodeKind::Comparator { .. })),
            shadow_comparators: count(&|k| matches!(k, NodeKind::Comparator { shadow: true, .. })),
            edu_cells: count(&|k| matches!(k, NodeKind::EduCell { .. })),
            mask_xors: count(&|k| match k {
                NodeKind::FunctionalUnit {
                    op: FuOp::Xor, inputs, ..
                } => inputs.iter().any(|i| mask_nets.contains(&i.as_str())),
                _ => false,
            }),
            counters: count(&|k| matches!(k, NodeKind::Counter { .. })),
            checkers: count(&|k| matches!(k, NodeKind::Checker { .. })),
            states: d.controller.states.len(),
            nodes: d.nodes.len(),
            nets: d.nets.len(),
        }
    }

    fn minus(&self, o: &StructureCounts) -> StructureCounts {
        StructureCounts {
            key_muxes: self.key_muxes - o.key_muxes,
            comparators: self.comparators - o.comparators,
            shadow_comparators: self.shadow_comparators - o.shadow_comparators,
            edu_cells: self.edu_cells - o.edu_cells,
            mask_xors: self.mask_xors - o.mask_xors,
            counters: self.counters - o.counters,
            checkers: self.checkers - o.checkers,
            states: self.states - o.states,
            nodes: self.nodes - o.nodes,
            nets: self.nets - o.nets,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OverheadReport {
    pub key_width: usize,
    pub before: StructureCounts,
    pub after: StructureCounts,
    pub added: StructureCounts,
}

impl OverheadReport {
    pub fn to_text(&self) -> String {
        let a = &self.added;
        format!(
            "key width          {}\n\
             key muxes          +{}\n\
             comparators        +{} ({} shadow)\n\
             edu cells          +{}\n\
             mask xors          +{}\n\
             counters           +{}\n\
             checkers           +{}\n\
             controller states  +{}\n\
             nodes              {} -> {}\n\
             nets               {} -> {}\n",
            self.key_width,
            a.key_muxes,
            a.comparators,
            a.shadow_comparators,
            a.edu_cells,
            a.mask_xors,
            a.counters,
            a.checkers,
            a.states,
            self.before.nodes,
            self.after.nodes,
            self.before.nets,
            self.after.nets,
        )
    }
}

/// Counts what `after` adds on top of `before`. `after` must be derived from
/// `before` by the hardening passes (which only ever add structure).
pub fn overhead_report(before: &Design, after: &Design) -> OverheadReport {
    let b = StructureCounts::of(before);
    let a = StructureCounts::of(after);
    OverheadReport {
        key_width: after.key_width,
        before: b,
        after: a,
        added: a.minus(&b),
    }
}
