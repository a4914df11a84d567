//! Function sets over declared finite probe domains, and the canonical
//! families: constants, the worst-case family, and language oracles.

use std::error::Error;
use std::fmt;

use formal_lang::{AllowedNext, GeneralLanguageSpec, LanguageSpec, Token};

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum InterrogateError {
    /// Two members agree on the whole declared domain.
    IndistinctMembers { a: usize, b: usize },
    /// No separating input exists in the declared domain.
    DomainExhausted { a: usize, b: usize },
    EmptySet,
    MalformedOracle { detail: String },
}

impl fmt::Display for InterrogateError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            InterrogateError::IndistinctMembers { a, b } => {
                write!(f, "members {a} and {b} agree on the entire probe domain")
            }
            InterrogateError::DomainExhausted { a, b } => {
                write!(f, "probe domain exhausted separating members {a} and {b}")
            }
            InterrogateError::EmptySet => write!(f, "function set is empty"),
            InterrogateError::MalformedOracle { detail } => {
                write!(f, "malformed oracle: {detail}")
            }
        }
    }
}

impl Error for InterrogateError {}

pub type OracleFn<X, Y> = Box<dyn Fn(&X) -> Y + Send + Sync>;

/// An indexed set of total-function oracles plus the finite probe
/// domain in canonical order. Members are verified pairwise distinct on
/// the domain at construction time.
pub struct FunctionSet<X, Y> {
    members: Vec<OracleFn<X, Y>>,
    domain: Vec<X>,
}

impl<X: Clone + PartialEq, Y: PartialEq> FunctionSet<X, Y> {
    pub fn new(members: Vec<OracleFn<X, Y>>, domain: Vec<X>) -> Result<Self, InterrogateError> {
        if members.is_empty() {
            return Err(InterrogateError::EmptySet);
        }
        let set = Self { members, domain };
        for a in 0..set.members.len() {
            for b in a + 1..set.members.len() {
                if set
                    .domain
                    .iter()
                    .all(|x| (set.members[a])(x) == (set.members[b])(x))
                {
                    return Err(InterrogateError::IndistinctMembers { a, b });
                }
            }
        }
        Ok(set)
    }

    pub fn len(&self) -> usize {
        self.members.len()
    }

    pub fn is_empty(&self) -> bool {
        self.members.is_empty()
    }

    pub fn domain(&self) -> &[X] {
        &self.domain
    }

    pub fn query(&self, member: usize, x: &X) -> Y {
        (self.members[member])(x)
    }

    pub fn oracle(&self, member: usize) -> impl Fn(&X) -> Y + '_ {
        move |x| (self.members[member])(x)
    }

    /// First input in canonical domain order on which `a` and `b`
    /// disagree.
    pub fn find_separating_input(&self, a: usize, b: usize) -> Result<&X, InterrogateError> {
        self.domain
            .iter()
            .find(|x| (self.members[a])(x) != (self.members[b])(x))
            .ok_or(InterrogateError::DomainExhausted { a, b })
    }
}

/// The easy family: `n -> i` for `i = 1..=count`. A single probe output
/// reveals the member.
pub fn constants_family(count: usize, domain_max: u64) -> FunctionSet<u64, u64> {
    let members: Vec<OracleFn<u64, u64>> = (1..=count as u64)
        .map(|i| Box::new(move |_: &u64| i) as OracleFn<u64, u64>)
        .collect();
    FunctionSet::new(members, (0..=domain_max).collect()).expect("constants are distinct")
}

/// The worst-case family: `xi_i(n) = 0` when `n = i`, else `n`. Even an
/// adaptive strategy needs `count - 1` probes in the worst case.
pub fn worstcase_family(count: usize) -> FunctionSet<u64, u64> {
    let members: Vec<OracleFn<u64, u64>> = (1..=count as u64)
        .map(|i| Box::new(move |&n: &u64| if n == i { 0 } else { n }) as OracleFn<u64, u64>)
        .collect();
    FunctionSet::new(members, (0..=count as u64).collect()).expect("members are distinct")
}

/// Generative language oracles (pure form, no EOS) for the full grid of
/// `k`-letter languages with offsets in `[1, bound]`.
///
/// The probe domain is every string that is a live prefix of at least
/// one grid language, in length-then-lexicographic order, capped at the
/// longest n = 1 member.
pub fn language_family(k: usize, bound: u32) -> FunctionSet<Vec<Token>, AllowedNext> {
    let specs = GeneralLanguageSpec::grid(k, bound);
    let cap = k + bound as usize * (k - 1);

    let mut domain: Vec<Vec<Token>> = Vec::new();
    let mut frontier: Vec<Vec<Token>> = vec![Vec::new()];
    while let Some(p) = frontier.pop() {
        if p.len() >= cap {
            continue;
        }
        for t in 1..=k as u8 {
            let mut q = p.clone();
            q.push(t);
            if specs.iter().any(|s| !s.allowed_next(&q, false).is_dead()) {
                domain.push(q.clone());
                frontier.push(q);
            }
        }
    }
    domain.sort_by(|a, b| a.len().cmp(&b.len()).then_with(|| a.cmp(b)));
    domain.dedup();

    let members: Vec<OracleFn<Vec<Token>, AllowedNext>> = specs
        .into_iter()
        .map(|spec| {
            Box::new(move |x: &Vec<Token>| spec.allowed_next(x, false))
                as OracleFn<Vec<Token>, AllowedNext>
        })
        .collect();
    FunctionSet::new(members, domain).expect("grid languages are pairwise distinct")
}
