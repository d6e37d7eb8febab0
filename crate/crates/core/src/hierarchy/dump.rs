use std::fmt::Write as _;

use super::Hierarchy;
use crate::attributes::{AttributeKind, NodeAttributes};

/// Line-oriented text dump: `node parent altitude area`, followed by the
/// four derived attributes when `attrs` is given.
pub fn dump_tree<H: Hierarchy + ?Sized>(tree: &H, attrs: Option<&NodeAttributes>) -> String {
    let mut out = String::new();
    let _ = writeln!(
        out,
        "# kind={} width={} height={} nodes={}",
        tree.kind_name(),
        tree.width(),
        tree.height(),
        tree.node_count()
    );
    let _ = write!(out, "# node parent altitude area");
    if attrs.is_some() {
        for kind in AttributeKind::ALL {
            let _ = write!(out, " {}", kind.name());
        }
    }
    out.push('\n');
    let areas = tree.areas();
    for (n, &p) in tree.parents().iter().enumerate() {
        let _ = write!(out, "{n} {p} {} {}", tree.altitude(n), areas[n]);
        if let Some(attrs) = attrs {
            for kind in AttributeKind::ALL {
                let _ = write!(out, " {:.6}", attrs.value(n, kind));
            }
        }
        out.push('\n');
    }
    out
}
