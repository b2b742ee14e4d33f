use crate::error::{Error, Result};

/// A finite group given by its multiplication table.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FiniteGroup {
    order: usize,
    mul: Vec<usize>,
    identity: usize,
    inverse: Vec<usize>,
}

impl FiniteGroup {
    /// Builds a group from `table[g][h] = gh`, checking closure, identity, inverses and
    /// associativity exhaustively.
    pub fn from_table(table: &[Vec<usize>]) -> Result<Self> {
        let n = table.len();
        if n == 0 {
            return Err(Error::invalid("group must have at least one element"));
        }
        if table.iter().any(|r| r.len() != n) {
            return Err(Error::invalid("multiplication table must be square"));
        }
        if table.iter().flatten().any(|&x| x >= n) {
            return Err(Error::invalid("multiplication table entry out of range"));
        }
        let mul: Vec<usize> = table.iter().flatten().copied().collect();
        let at = |g: usize, h: usize| mul[g * n + h];
        let identity = (0..n)
            .find(|&e| (0..n).all(|g| at(e, g) == g && at(g, e) == g))
            .ok_or_else(|| Error::invalid("no identity element"))?;
        let mut inverse = vec![0; n];
        for g in 0..n {
            inverse[g] = (0..n)
                .find(|&h| at(g, h) == identity && at(h, g) == identity)
                .ok_or_else(|| Error::invalid(format!("element {g} has no inverse")))?;
        }
        for a in 0..n {
            for b in 0..n {
                let ab = at(a, b);
                for c in 0..n {
                    if at(ab, c) != at(a, at(b, c)) {
                        return Err(Error::invalid(format!(
                            "associativity fails at ({a},{b},{c})"
                        )));
                    }
                }
            }
        }
        Ok(FiniteGroup {
            order: n,
            mul,
            identity,
            inverse,
        })
    }

    fn from_fn(n: usize, f: impl Fn(usize, usize) -> usize) -> Self {
        let table: Vec<Vec<usize>> = (0..n).map(|g| (0..n).map(|h| f(g, h)).collect()).collect();
        Self::from_table(&table).expect("built-in group constructor produced a valid table")
    }

    pub fn trivial() -> Self {
        Self::cyclic(1)
    }

    /// Z_n with element k ↦ k.
    pub fn cyclic(n: usize) -> Self {
        assert!(n >= 1, "cyclic group needs n >= 1");
        Self::from_fn(n, |a, b| (a + b) % n)
    }

    /// Dihedral group of order 2n; element r^k s^j has index k + n·j.
    pub fn dihedral(n: usize) -> Self {
        assert!(n >= 1, "dihedral group needs n >= 1");
        Self::from_fn(2 * n, |x, y| {
            let (a, i) = (x % n, x / n);
            let (b, j) = (y % n, y / n);
            let k = if i == 0 { (a + b) % n } else { (a + n - b) % n };
            k + n * ((i + j) % 2)
        })
    }

    /// Symmetric group on n ≤ 5 letters; permutations in lexicographic order, composition
    /// (στ)(i) = σ(τ(i)).
    pub fn symmetric(n: usize) -> Result<Self> {
        if n == 0 || n > 5 {
            return Err(Error::invalid("symmetric group supported for 1 <= n <= 5"));
        }
        let perms = permutations(n);
        let index = |p: &[usize]| perms.iter().position(|q| q == p).expect("closed");
        let table: Vec<Vec<usize>> = perms
            .iter()
            .map(|s| {
                perms
                    .iter()
                    .map(|t| {
                        let st: Vec<usize> = (0..n).map(|i| s[t[i]]).collect();
                        index(&st)
                    })
                    .collect()
            })
            .collect();
        Self::from_table(&table)
    }

    /// A × B with (a, b) ↦ a·|B| + b.
    pub fn direct_product(a: &FiniteGroup, b: &FiniteGroup) -> Self {
        let m = b.order;
        Self::from_fn(a.order * m, |x, y| {
            a.mul(x / m, y / m) * m + b.mul(x % m, y % m)
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn identity(&self) -> usize {
        self.identity
    }

    pub fn mul(&self, g: usize, h: usize) -> usize {
        self.mul[g * self.order + h]
    }

    pub fn inv(&self, g: usize) -> usize {
        self.inverse[g]
    }

    pub fn elements(&self) -> std::ops::Range<usize> {
        0..self.order
    }

    pub fn table(&self) -> Vec<Vec<usize>> {
        self.mul.chunks(self.order).map(|r| r.to_vec()).collect()
    }

    /// True iff `members` is a nonempty subset closed under products and inverses.
    pub fn is_subgroup(&self, members: &[usize]) -> bool {
        if members.is_empty() || members.iter().any(|&h| h >= self.order) {
            return false;
        }
        let set: std::collections::BTreeSet<usize> = members.iter().copied().collect();
        set.iter().all(|&a| {
            set.contains(&self.inv(a)) && set.iter().all(|&b| set.contains(&self.mul(a, b)))
        })
    }

    /// All subgroups, each as a sorted member list, in a deterministic order.
    pub fn subgroups(&self) -> Vec<Vec<usize>> {
        // closures of all element triples; exhaustive whenever every subgroup is
        // generated by three elements, true for the small groups used here
        let mut found: std::collections::BTreeSet<Vec<usize>> = Default::default();
        let n = self.order;
        for a in 0..n {
            for b in a..n {
                found.insert(self.generated(&[a, b]));
            }
        }
        let pairs: Vec<Vec<usize>> = found.iter().cloned().collect();
        for p in &pairs {
            for c in 0..n {
                let mut gens = p.clone();
                gens.push(c);
                found.insert(self.generated(&gens));
            }
        }
        let mut out: Vec<Vec<usize>> = found.into_iter().collect();
        out.sort_by_key(|s| (s.len(), s.clone()));
        out
    }

    /// The subgroup generated by `gens`, sorted.
    pub fn generated(&self, gens: &[usize]) -> Vec<usize> {
        let mut set: std::collections::BTreeSet<usize> = [self.identity].into_iter().collect();
        let mut frontier: Vec<usize> = vec![self.identity];
        while let Some(x) = frontier.pop() {
            for &g in gens {
                let y = self.mul(x, g);
                if set.insert(y) {
                    frontier.push(y);
                }
            }
        }
        set.into_iter().collect()
    }
}

fn permutations(n: usize) -> Vec<Vec<usize>> {
    fn rec(prefix: &mut Vec<usize>, used: &mut [bool], out: &mut Vec<Vec<usize>>) {
        if prefix.len() == used.len() {
            out.push(prefix.clone());
            return;
        }
        for i in 0..used.len() {
            if !used[i] {
                used[i] = true;
                prefix.push(i);
                rec(prefix, used, out);
                prefix.pop();
                used[i] = false;
            }
        }
    }
    let mut out = vec![];
    rec(&mut vec![], &mut vec![false; n], &mut out);
    out
}

/// A left action of a finite group on {0, …, set_size−1}.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroupAction {
    group: FiniteGroup,
    set_size: usize,
    act: Vec<usize>,
}

impl GroupAction {
    /// `table[g][x] = g·x`; the action axioms are checked exhaustively.
    pub fn new(group: FiniteGroup, table: &[Vec<usize>]) -> Result<Self> {
        if table.len() != group.order() {
            return Err(Error::invalid("action table needs one row per group element"));
        }
        let set_size = table.first().map_or(0, |r| r.len());
        if table.iter().any(|r| r.len() != set_size) {
            return Err(Error::invalid("action table rows differ in length"));
        }
        if table.iter().flatten().any(|&x| x >= set_size) {
            return Err(Error::invalid("action table entry out of range"));
        }
        let act: Vec<usize> = table.iter().flatten().copied().collect();
        let a = GroupAction {
            group,
            set_size,
            act,
        };
        let e = a.group.identity();
        for x in 0..set_size {
            if a.act(e, x) != x {
                return Err(Error::invalid(format!("identity moves point {x}")));
            }
        }
        for g in a.group.elements() {
            for h in a.group.elements() {
                let gh = a.group.mul(g, h);
                for x in 0..set_size {
                    if a.act(gh, x) != a.act(g, a.act(h, x)) {
                        return Err(Error::invalid(format!(
                            "action not compatible with product at (g={g}, h={h}, x={x})"
                        )));
                    }
                }
            }
        }
        Ok(a)
    }

    /// Every element fixes every point.
    pub fn trivial(group: FiniteGroup, set_size: usize) -> Self {
        let table: Vec<Vec<usize>> = group.elements().map(|_| (0..set_size).collect()).collect();
        Self::new(group, &table).expect("trivial action")
    }

    /// Left translation of G on itself.
    pub fn regular(group: FiniteGroup) -> Self {
        let table = group.table();
        Self::new(group, &table).expect("left translation")
    }

    pub fn group(&self) -> &FiniteGroup {
        &self.group
    }

    pub fn set_size(&self) -> usize {
        self.set_size
    }

    pub fn act(&self, g: usize, x: usize) -> usize {
        self.act[g * self.set_size + x]
    }

    pub fn table(&self) -> Vec<Vec<usize>> {
        if self.set_size == 0 {
            return vec![vec![]; self.group.order()];
        }
        self.act.chunks(self.set_size).map(|r| r.to_vec()).collect()
    }
}

/// A subgroup H ≤ G with its left coset space Ω = G/H and a section s: Ω → G.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SubgroupData {
    parent: FiniteGroup,
    members: Vec<usize>,
    cosets: Vec<Vec<usize>>,
    section: Vec<usize>,
    projection: Vec<usize>,
}

impl SubgroupData {
    /// Enumerates G/H. The identity coset comes first; the others follow in order of
    /// their smallest element, which is also their section value.
    pub fn new(parent: FiniteGroup, members: &[usize]) -> Result<Self> {
        if !parent.is_subgroup(members) {
            return Err(Error::invalid("member list is not a subgroup"));
        }
        let mut members: Vec<usize> = members.to_vec();
        members.sort_unstable();
        members.dedup();
        let n = parent.order();
        let e = parent.identity();
        let mut projection = vec![usize::MAX; n];
        let mut cosets = vec![];
        let mut section = vec![];
        let starts = std::iter::once(e).chain((0..n).filter(|&g| g != e));
        for g in starts {
            if projection[g] != usize::MAX {
                continue;
            }
            let idx = cosets.len();
            let mut coset: Vec<usize> = members.iter().map(|&h| parent.mul(g, h)).collect();
            coset.sort_unstable();
            for &x in &coset {
                projection[x] = idx;
            }
            section.push(g);
            cosets.push(coset);
        }
        Ok(SubgroupData {
            parent,
            members,
            cosets,
            section,
            projection,
        })
    }

    pub fn trivial_subgroup(parent: FiniteGroup) -> Self {
        let e = parent.identity();
        Self::new(parent, &[e]).expect("trivial subgroup")
    }

    pub fn whole(parent: FiniteGroup) -> Self {
        let all: Vec<usize> = parent.elements().collect();
        Self::new(parent, &all).expect("whole group")
    }

    pub fn parent(&self) -> &FiniteGroup {
        &self.parent
    }

    pub fn members(&self) -> &[usize] {
        &self.members
    }

    pub fn order(&self) -> usize {
        self.members.len()
    }

    pub fn contains(&self, g: usize) -> bool {
        self.members.binary_search(&g).is_ok()
    }

    /// Position of `h` in the member list.
    pub fn position(&self, h: usize) -> Option<usize> {
        self.members.binary_search(&h).ok()
    }

    pub fn omega_size(&self) -> usize {
        self.cosets.len()
    }

    pub fn cosets(&self) -> &[Vec<usize>] {
        &self.cosets
    }

    pub fn section(&self, omega: usize) -> usize {
        self.section[omega]
    }

    pub fn project(&self, g: usize) -> usize {
        self.projection[g]
    }

    /// g·ω on the coset space.
    pub fn act(&self, g: usize, omega: usize) -> usize {
        self.projection[self.parent.mul(g, self.section[omega])]
    }

    pub fn action(&self) -> GroupAction {
        let table: Vec<Vec<usize>> = self
            .parent
            .elements()
            .map(|g| (0..self.omega_size()).map(|w| self.act(g, w)).collect())
            .collect();
        GroupAction::new(self.parent.clone(), &table).expect("coset action")
    }
}
