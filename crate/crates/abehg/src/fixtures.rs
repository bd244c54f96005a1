//! Reference fixtures shared by the demo flow, the benchmark harness, and the
//! test suites: the medical-college access policy `T` and the attribute
//! profiles of the data users evaluated against it.

use crate::policy::{parse_postfix, AccessTree, AttributeSet, PolicyNode};

/// The reference access policy in postfix form, as a data owner would write
/// it: records readable by radiology clinicians or research staff of AMU.
pub const POLICY_T_POSTFIX: &str = "Position: Doctor Position: Researcher Position: Professor 1of3 \
     Department: Radiology 2of2 Position: PhD Position: Postdoc 1of3 University: AMU 2of2";

/// The same policy in boolean infix form.
pub const POLICY_T_BOOLEAN: &str = "[[[[position = Doctor OR position = Researcher OR \
     position = Professor] AND Department = Radiology] OR position = PhD OR \
     position = Postdoc] AND University = AMU]";

/// Parsed form of [`POLICY_T_POSTFIX`].
pub fn policy_t() -> AccessTree {
    parse_postfix(POLICY_T_POSTFIX).expect("reference policy parses")
}

/// Attribute set `S0`: a radiology doctor at AMU (satisfies `T`).
pub fn attrs_s0() -> AttributeSet {
    AttributeSet::parse_list("Position: Doctor, Department: Radiology, University: AMU")
        .expect("fixture attributes parse")
}

/// Attribute set `S1`: a student at AMU (does not satisfy `T`).
pub fn attrs_s1() -> AttributeSet {
    AttributeSet::parse_list("Position: Student, University: AMU").expect("fixture attributes parse")
}

/// Attribute set `S2`: a PhD candidate of the JNMC college at AMU
/// (satisfies `T`).
pub fn attrs_s2() -> AttributeSet {
    AttributeSet::parse_list("Position: PhD, College: JNMC, University: AMU")
        .expect("fixture attributes parse")
}

/// The eight data-user attribute profiles of the reference scenario, from one
/// to eight attributes, paired with whether each satisfies [`policy_t`].
/// Profiles six through eight carry two `position:` attributes on purpose;
/// attributes sharing a prefix are independent.
pub fn data_user_rows() -> Vec<(AttributeSet, bool)> {
    let rows: [(&str, bool); 8] = [
        ("Position: Doctor", false),
        ("Position: PhD, University: AMU", true),
        (
            "Position: Doctor, Department: Radiology, University: AMU",
            true,
        ),
        (
            "Position: PhD, College: JNMC, University: AMU, Department: Radiology, City: Aligarh",
            true,
        ),
        (
            "Position: Researcher, University: AMU, Department: Radiology, City: Aligarh, \
             College: JNMC",
            true,
        ),
        (
            "Position: Postdoc, College: JNMC, University: AMU, Department: Radiology, \
             City: Aligarh, Position: Researcher",
            true,
        ),
        (
            "Position: PhD, College: JNMC, University: AMU, Department: Radiology, \
             City: Aligarh, Position: Researcher, Status: Temporary",
            true,
        ),
        (
            "Position: Doctor, College: JNMC, University: AMU, Department: Radiology, \
             City: Aligarh, Position: Researcher, Status: Permanent, Year: 2022",
            true,
        ),
    ];
    rows.iter()
        .map(|(list, ok)| {
            (
                AttributeSet::parse_list(list).expect("fixture attributes parse"),
                *ok,
            )
        })
        .collect()
}

/// Benchmark shape: `n` synthetic attributes and the n-of-n policy over all
/// of them, so every attribute takes part in decryption.
pub fn and_chain(n: usize) -> (AttributeSet, AccessTree) {
    assert!(n >= 1, "need at least one attribute");
    let names: Vec<String> = (1..=n).map(|i| format!("bench:attr{i:02}")).collect();
    let attrs = AttributeSet::from_raw(&names).expect("synthetic attributes normalize");
    let leaves: Vec<PolicyNode> = attrs.iter().cloned().map(PolicyNode::Leaf).collect();
    let root = if leaves.len() == 1 {
        leaves.into_iter().next().expect("nonempty")
    } else {
        PolicyNode::Gate {
            threshold: leaves.len(),
            children: leaves,
        }
    };
    (attrs, AccessTree::new(root).expect("valid gate"))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{satisfies, serialize_policy};

    #[test]
    fn reference_rows_match_expected_outcomes() {
        let t = policy_t();
        for (i, (attrs, expected)) in data_user_rows().iter().enumerate() {
            assert_eq!(satisfies(&t, attrs), *expected, "row {}", i + 1);
        }
        assert!(satisfies(&t, &attrs_s0()));
        assert!(!satisfies(&t, &attrs_s1()));
        assert!(satisfies(&t, &attrs_s2()));
    }

    #[test]
    fn and_chain_shapes() {
        let (attrs, tree) = and_chain(1);
        assert_eq!(attrs.len(), 1);
        assert_eq!(tree.leaf_count(), 1);
        let (attrs, tree) = and_chain(5);
        assert_eq!(attrs.len(), 5);
        assert_eq!(tree.leaf_count(), 5);
        assert!(serialize_policy(&tree).ends_with("5of5"));
        assert!(satisfies(&tree, &attrs));
    }
}
