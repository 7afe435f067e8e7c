use std::cmp::Reverse;
use std::collections::{BinaryHeap, HashMap};

use super::{CaseError, PlannedFile, SimulationPlan};

/// Generation precedence of a folder: system, constant, initial conditions, then everything else.
pub fn folder_rank(folder: &str) -> u8 {
    let top = folder.split('/').next().unwrap_or("");
    match top {
        "system" => 0,
        "constant" => 1,
        "0" | "0.orig" => 2,
        _ => 3,
    }
}

/// Order in which the input writer generates the plan's files.
///
/// With dependencies enabled this is the lexicographically smallest topological
/// order under the key `(folder rank, plan index)`: at every step the smallest
/// ready file is emitted. With dependencies disabled the plan order is kept.
pub fn generation_order(plan: &SimulationPlan, file_dependency_enabled: bool) -> Result<Vec<PlannedFile>, CaseError> {
    if !file_dependency_enabled {
        return Ok(plan.files.clone());
    }
    plan.validate()?;
    let index: HashMap<String, usize> = plan.files.iter().enumerate().map(|(i, f)| (f.id(), i)).collect();
    let n = plan.files.len();
    let mut indegree = vec![0usize; n];
    let mut dependents: Vec<Vec<usize>> = vec![Vec::new(); n];
    for (i, f) in plan.files.iter().enumerate() {
        for d in &f.dependencies {
            let j = index[d];
            indegree[i] += 1;
            dependents[j].push(i);
        }
    }

    let key = |i: usize| (folder_rank(&plan.files[i].folder_name), i);
    let mut ready: BinaryHeap<Reverse<(u8, usize)>> =
        (0..n).filter(|&i| indegree[i] == 0).map(|i| Reverse(key(i))).collect();
    let mut out = Vec::with_capacity(n);
    while let Some(Reverse((_, i))) = ready.pop() {
        out.push(plan.files[i].clone());
        for &k in &dependents[i] {
            indegree[k] -= 1;
            if indegree[k] == 0 {
                ready.push(Reverse(key(k)));
            }
        }
    }
    if out.len() < n {
        let stuck: Vec<usize> = (0..n).filter(|&i| indegree[i] > 0).collect();
        return Err(CaseError::CyclicDependency(find_cycle(plan, &index, &stuck)));
    }
    Ok(out)
}

fn find_cycle(plan: &SimulationPlan, index: &HashMap<String, usize>, stuck: &[usize]) -> Vec<String> {
    // Every stuck node has a stuck dependency, so walking dependencies must revisit a node.
    let stuck_set: std::collections::HashSet<usize> = stuck.iter().copied().collect();
    let mut path: Vec<usize> = Vec::new();
    let mut pos: HashMap<usize, usize> = HashMap::new();
    let mut cur = stuck[0];
    loop {
        if let Some(&p) = pos.get(&cur) {
            let mut cycle: Vec<String> = path[p..].iter().map(|&i| plan.files[i].id()).collect();
            cycle.push(plan.files[cur].id());
            return cycle;
        }
        pos.insert(cur, path.len());
        path.push(cur);
        cur = plan.files[cur]
            .dependencies
            .iter()
            .map(|d| index[d])
            .find(|j| stuck_set.contains(j))
            .expect("stuck node has a stuck dependency");
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn plan(files: Vec<PlannedFile>) -> SimulationPlan {
        SimulationPlan { files, source_reference: "ref".into() }
    }

    fn ids(files: &[PlannedFile]) -> Vec<String> {
        files.iter().map(|f| f.id()).collect()
    }

    /// Exhaustive oracle: smallest valid permutation under the (rank, index) key sequence.
    fn brute_force(p: &SimulationPlan) -> Vec<String> {
        let n = p.files.len();
        let idx: HashMap<String, usize> = p.files.iter().enumerate().map(|(i, f)| (f.id(), i)).collect();
        let mut best: Option<Vec<(u8, usize)>> = None;
        let mut perm: Vec<usize> = (0..n).collect();
        permute(&mut perm, 0, &mut |perm| {
            let mut place = vec![0; n];
            for (pos, &i) in perm.iter().enumerate() {
                place[i] = pos;
            }
            let valid = p
                .files
                .iter()
                .enumerate()
                .all(|(i, f)| f.dependencies.iter().all(|d| place[idx[d]] < place[i]));
            if valid {
                let keys: Vec<(u8, usize)> = perm.iter().map(|&i| (folder_rank(&p.files[i].folder_name), i)).collect();
                if best.as_ref().map_or(true, |b| keys < *b) {
                    best = Some(keys);
                }
            }
        });
        best.unwrap().into_iter().map(|(_, i)| p.files[i].id()).collect()
    }

    fn permute(v: &mut Vec<usize>, k: usize, f: &mut dyn FnMut(&[usize])) {
        if k == v.len() {
            f(v);
            return;
        }
        for i in k..v.len() {
            v.swap(k, i);
            permute(v, k + 1, f);
            v.swap(k, i);
        }
    }

    #[test]
    fn folders_without_deps_follow_system_constant_zero() {
        let p = plan(vec![
            PlannedFile::new("0", "U"),
            PlannedFile::new("constant", "transportProperties"),
            PlannedFile::new("system", "controlDict"),
            PlannedFile::new("0", "p"),
            PlannedFile::new("system", "fvSchemes"),
            PlannedFile::new("", "Allrun"),
        ]);
        let out = ids(&generation_order(&p, true).unwrap());
        assert_eq!(
            out,
            ["system/controlDict", "system/fvSchemes", "constant/transportProperties", "0/U", "0/p", "Allrun"]
        );
    }

    #[test]
    fn single_file() {
        let p = plan(vec![PlannedFile::new("system", "controlDict")]);
        assert_eq!(ids(&generation_order(&p, true).unwrap()), ["system/controlDict"]);
    }

    #[test]
    fn cycle_is_reported() {
        let p = plan(vec![
            PlannedFile::new("system", "A").with_deps(&["system/B"]),
            PlannedFile::new("system", "B").with_deps(&["system/A"]),
        ]);
        match generation_order(&p, true) {
            Err(CaseError::CyclicDependency(c)) => {
                assert_eq!(c.first(), c.last());
                assert!(c.contains(&"system/A".to_string()) && c.contains(&"system/B".to_string()));
            }
            other => panic!("expected cycle, got {other:?}"),
        }
    }

    #[test]
    fn disabled_keeps_plan_order() {
        let p = plan(vec![PlannedFile::new("0", "U"), PlannedFile::new("system", "controlDict")]);
        assert_eq!(ids(&generation_order(&p, false).unwrap()), ["0/U", "system/controlDict"]);
    }

    #[test]
    fn six_file_mixed_deps_match_exhaustive_enumeration() {
        // A dependency pulls constant/turbulenceProperties after 0/nut, and
        // system/fvSolution after constant/transportProperties.
        let p = plan(vec![
            PlannedFile::new("0", "U").with_deps(&["constant/transportProperties"]),
            PlannedFile::new("constant", "turbulenceProperties").with_deps(&["0/nut"]),
            PlannedFile::new("system", "fvSolution").with_deps(&["constant/transportProperties"]),
            PlannedFile::new("constant", "transportProperties"),
            PlannedFile::new("0", "nut"),
            PlannedFile::new("system", "controlDict"),
        ]);
        let expected = brute_force(&p);
        assert_eq!(
            expected,
            [
                "system/controlDict",
                "constant/transportProperties",
                "system/fvSolution",
                "0/U",
                "0/nut",
                "constant/turbulenceProperties"
            ]
        );
        assert_eq!(ids(&generation_order(&p, true).unwrap()), expected);
    }
}
