//! Binary identification trees: recursive splitting on separating
//! inputs, with both the submit-everything and the walk-the-path
//! identification strategies.

use crate::set::{FunctionSet, InterrogateError};
use crate::transcript::Transcript;

#[derive(Clone, Debug)]
pub enum TreeNode<X, Y> {
    Leaf {
        member: usize,
    },
    Branch {
        input: X,
        reference: Y,
        agree: Box<TreeNode<X, Y>>,
        disagree: Box<TreeNode<X, Y>>,
    },
}

/// Binary tree whose leaves are single members and whose branches are
/// (probing input, reference output) tests.
#[derive(Clone, Debug)]
pub struct IdentificationTree<X, Y> {
    pub root: TreeNode<X, Y>,
}

impl<X, Y> IdentificationTree<X, Y> {
    pub fn leaf_count(&self) -> usize {
        fn walk<X, Y>(n: &TreeNode<X, Y>) -> usize {
            match n {
                TreeNode::Leaf { .. } => 1,
                TreeNode::Branch { agree, disagree, .. } => walk(agree) + walk(disagree),
            }
        }
        walk(&self.root)
    }

    pub fn branch_count(&self) -> usize {
        fn walk<X, Y>(n: &TreeNode<X, Y>) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Branch { agree, disagree, .. } => 1 + walk(agree) + walk(disagree),
            }
        }
        walk(&self.root)
    }

    pub fn depth(&self) -> usize {
        fn walk<X, Y>(n: &TreeNode<X, Y>) -> usize {
            match n {
                TreeNode::Leaf { .. } => 0,
                TreeNode::Branch { agree, disagree, .. } => 1 + walk(agree).max(walk(disagree)),
            }
        }
        walk(&self.root)
    }

    /// Branch (input, reference) pairs in pre-order.
    pub fn branch_tests(&self) -> Vec<(&X, &Y)> {
        fn walk<'a, X, Y>(n: &'a TreeNode<X, Y>, out: &mut Vec<(&'a X, &'a Y)>) {
            if let TreeNode::Branch {
                input,
                reference,
                agree,
                disagree,
            } = n
            {
                out.push((input, reference));
                walk(agree, out);
                walk(disagree, out);
            }
        }
        let mut out = Vec::new();
        walk(&self.root, &mut out);
        out
    }
}

/// Recursively split the member set: pivot on the first member, first
/// separating input in canonical domain order. Exactly `|D| - 1`
/// branch nodes for `|D|` members.
pub fn build_identification_tree<X: Clone + PartialEq, Y: Clone + PartialEq>(
    set: &FunctionSet<X, Y>,
) -> Result<IdentificationTree<X, Y>, InterrogateError> {
    fn split<X: Clone + PartialEq, Y: Clone + PartialEq>(
        set: &FunctionSet<X, Y>,
        members: Vec<usize>,
    ) -> Result<TreeNode<X, Y>, InterrogateError> {
        if members.len() == 1 {
            return Ok(TreeNode::Leaf { member: members[0] });
        }
        let pivot = members[0];
        let input = set
            .domain()
            .iter()
            .find(|x| {
                members
                    .iter()
                    .any(|&m| set.query(m, x) != set.query(pivot, x))
            })
            .ok_or(InterrogateError::DomainExhausted {
                a: pivot,
                b: members[1],
            })?
            .clone();
        let reference = set.query(pivot, &input);
        let (agree, disagree): (Vec<usize>, Vec<usize>) = members
            .into_iter()
            .partition(|&m| set.query(m, &input) == reference);
        Ok(TreeNode::Branch {
            input,
            reference,
            agree: Box::new(split(set, agree)?),
            disagree: Box::new(split(set, disagree)?),
        })
    }

    if set.is_empty() {
        return Err(InterrogateError::EmptySet);
    }
    let tree = IdentificationTree {
        root: split(set, (0..set.len()).collect())?,
    };
    debug_assert_eq!(tree.branch_count() + 1, tree.leaf_count());
    Ok(tree)
}

/// Non-interactive identification: submit the probing input of every
/// branch node up front (`|D| - 1` interactions), then resolve the
/// unique consistent leaf offline.
pub fn identify_noninteractive<X, Y, F>(
    set: &FunctionSet<X, Y>,
    tree: &IdentificationTree<X, Y>,
    oracle: F,
) -> Transcript<X, Y>
where
    X: Clone + PartialEq,
    Y: Clone + PartialEq,
    F: Fn(&X) -> Y,
{
    let tests = tree.branch_tests();
    let probes: Vec<(X, Y)> = tests
        .iter()
        .map(|(x, _)| ((*x).clone(), oracle(x)))
        .collect();

    // Walk the tree using the recorded answers per branch node. Branch
    // order in `branch_tests` is pre-order, so a cursor that skips
    // subtrees keeps alignment; simpler is to re-look up by position.
    fn resolve<X: PartialEq + Clone, Y: PartialEq>(
        node: &TreeNode<X, Y>,
        answers: &[(X, Y)],
        cursor: &mut usize,
    ) -> usize {
        match node {
            TreeNode::Leaf { member } => *member,
            TreeNode::Branch {
                reference,
                agree,
                disagree,
                ..
            } => {
                let (_, answer) = &answers[*cursor];
                *cursor += 1;
                if answer == reference {
                    let m = resolve(agree, answers, cursor);
                    *cursor += count_branches(disagree);
                    m
                } else {
                    *cursor += count_branches(agree);
                    resolve(disagree, answers, cursor)
                }
            }
        }
    }

    fn count_branches<X, Y>(n: &TreeNode<X, Y>) -> usize {
        match n {
            TreeNode::Leaf { .. } => 0,
            TreeNode::Branch { agree, disagree, .. } => {
                1 + count_branches(agree) + count_branches(disagree)
            }
        }
    }

    let mut cursor = 0;
    let candidate = resolve(&tree.root, &probes, &mut cursor);

    // The oracle must agree with the candidate on every probe,
    // otherwise it is not a member of the set.
    let consistent = probes
        .iter()
        .all(|(x, y)| set.query(candidate, x) == *y);
    Transcript {
        probes,
        identified: consistent.then_some(candidate),
    }
}

/// Interactive identification: walk root to leaf, probing only along
/// the path. Repeated inputs are answered from memory, never recounted.
pub fn identify_interactive_tree<X, Y, F>(
    set: &FunctionSet<X, Y>,
    tree: &IdentificationTree<X, Y>,
    oracle: F,
) -> Transcript<X, Y>
where
    X: Clone + PartialEq,
    Y: Clone + PartialEq,
    F: Fn(&X) -> Y,
{
    let mut probes: Vec<(X, Y)> = Vec::new();
    let mut node = &tree.root;
    loop {
        match node {
            TreeNode::Leaf { member } => {
                let consistent = probes
                    .iter()
                    .all(|(x, y)| set.query(*member, x) == *y);
                return Transcript {
                    probes,
                    identified: consistent.then_some(*member),
                };
            }
            TreeNode::Branch {
                input,
                reference,
                agree,
                disagree,
            } => {
                let answer = match probes.iter().find(|(x, _)| x == input) {
                    Some((_, y)) => y.clone(),
                    None => {
                        let y = oracle(input);
                        probes.push((input.clone(), y.clone()));
                        y
                    }
                };
                node = if answer == *reference { agree } else { disagree };
            }
        }
    }
}

/// The fast path for output-readable sets (e.g. distinct constants):
/// one probe, then match the answer against every member.
pub fn identify_by_single_probe<X, Y, F>(set: &FunctionSet<X, Y>, oracle: F) -> Transcript<X, Y>
where
    X: Clone + PartialEq,
    Y: Clone + PartialEq,
    F: Fn(&X) -> Y,
{
    let x = set.domain()[0].clone();
    let y = oracle(&x);
    let matches: Vec<usize> = (0..set.len())
        .filter(|&m| set.query(m, &x) == y)
        .collect();
    Transcript {
        probes: vec![(x, y)],
        identified: if matches.len() == 1 {
            Some(matches[0])
        } else {
            None
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::set::{constants_family, worstcase_family, OracleFn};

    #[test]
    fn singleton_set_needs_no_probes() {
        let members: Vec<OracleFn<u64, u64>> = vec![Box::new(|&n: &u64| n * 2)];
        let set = FunctionSet::new(members, vec![0, 1]).unwrap();
        let tree = build_identification_tree(&set).unwrap();
        assert_eq!(tree.branch_count(), 0);
        let t = identify_interactive_tree(&set, &tree, |x| set.query(0, x));
        assert_eq!(t.count(), 0);
        assert_eq!(t.identified, Some(0));
    }

    #[test]
    fn two_member_set_needs_one_probe() {
        let set = constants_family(2, 5);
        let tree = build_identification_tree(&set).unwrap();
        for m in 0..2 {
            let t = identify_noninteractive(&set, &tree, |x| set.query(m, x));
            assert_eq!(t.count(), 1);
            assert_eq!(t.identified, Some(m));
        }
    }

    #[test]
    fn constants_fast_path_uses_one_probe() {
        let set = constants_family(12, 30);
        for m in 0..set.len() {
            let t = identify_by_single_probe(&set, |x| set.query(m, x));
            assert_eq!(t.count(), 1);
            assert_eq!(t.identified, Some(m));
        }
    }

    #[test]
    fn tree_structure_identity_holds() {
        let set = worstcase_family(9);
        let tree = build_identification_tree(&set).unwrap();
        assert_eq!(tree.leaf_count(), 9);
        assert_eq!(tree.branch_count(), 8);
    }

    #[test]
    fn worstcase_family_needs_all_probes_in_the_worst_case() {
        let l = 10;
        let set = worstcase_family(l);
        let tree = build_identification_tree(&set).unwrap();
        let mut worst = 0;
        for m in 0..l {
            let t = identify_interactive_tree(&set, &tree, |x| set.query(m, x));
            assert_eq!(t.identified, Some(m));
            assert!(t.count() <= l - 1);
            worst = worst.max(t.count());
        }
        assert_eq!(worst, l - 1);

        // Non-interactive always pays the full branch count.
        let t = identify_noninteractive(&set, &tree, |x| set.query(0, x));
        assert_eq!(t.count(), l - 1);
    }

    #[test]
    fn balanced_set_identifies_in_log_depth() {
        // f_i(j) = bit j of i over domain {0,1,2}: every split halves.
        let members: Vec<OracleFn<u64, u64>> = (0..8u64)
            .map(|i| Box::new(move |&j: &u64| (i >> j) & 1) as OracleFn<u64, u64>)
            .collect();
        let set = FunctionSet::new(members, vec![0, 1, 2]).unwrap();
        let tree = build_identification_tree(&set).unwrap();
        assert_eq!(tree.depth(), 3);
        for m in 0..8 {
            let t = identify_interactive_tree(&set, &tree, |x| set.query(m, x));
            assert_eq!(t.identified, Some(m));
            assert!(t.count() <= 3);
        }
    }

    #[test]
    fn interactive_never_beats_noninteractive_count() {
        let set = worstcase_family(7);
        let tree = build_identification_tree(&set).unwrap();
        for m in 0..set.len() {
            let ti = identify_interactive_tree(&set, &tree, |x| set.query(m, x));
            let tn = identify_noninteractive(&set, &tree, |x| set.query(m, x));
            assert!(ti.count() <= tn.count());
            assert_eq!(ti.identified, tn.identified);
        }
    }

    #[test]
    fn oracle_outside_set_detected() {
        let set = constants_family(3, 5);
        let tree = build_identification_tree(&set).unwrap();
        let t = identify_noninteractive(&set, &tree, |_| 99u64);
        assert_eq!(t.identified, None);
    }
}
