use std::fs;
use std::path::Path;

use anyhow::{Context, Result};
use cervdx::io::{write_case, write_codes};
use cervdx::phantom::{generate, random_spec, PhantomSpec, SplitMix64};
use cervdx::report::{read_json, write_json};
use rayon::prelude::*;

/// Write `<id>.image.png`, `<id>.mask.png`, `<id>.meta.json`,
/// `<id>.truth.json` (diagnosis truth), `<id>.phantom.json` (full truth
/// record) and `<id>.instances.png`.
pub fn write_phantom(spec: &PhantomSpec, out: &Path) -> Result<()> {
    let (case, truth) = generate(spec).with_context(|| format!("phantom {}", spec.id))?;
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    write_case(&case, out)?;
    let id = &case.id;
    write_json(&truth.summary(id), &out.join(format!("{id}.truth.json")))?;
    write_json(&truth.record(id), &out.join(format!("{id}.phantom.json")))?;
    write_codes(
        truth.instance_map.codes(),
        &out.join(format!("{id}.instances.png")),
    )?;
    Ok(())
}

/// Either the phantom file (or defaults) once, or `count` randomized phantoms
/// named `<prefix>-000`, `<prefix>-001`, ...
pub fn cmd_phantom(
    spec_path: Option<&Path>,
    out: &Path,
    count: Option<usize>,
    seed: u64,
    id: Option<&str>,
) -> Result<i32> {
    match count {
        None => {
            let mut spec: PhantomSpec = match spec_path {
                Some(p) => read_json(p)?,
                None => PhantomSpec::default(),
            };
            if let Some(id) = id {
                spec.id = id.to_string();
            }
            write_phantom(&spec, out)?;
        }
        Some(n) => {
            let prefix = id.unwrap_or("phantom");
            let mut rng = SplitMix64::new(seed);
            let specs: Vec<PhantomSpec> = (0..n)
                .map(|i| random_spec(&mut rng, format!("{prefix}-{i:03}")))
                .collect();
            specs.par_iter().try_for_each(|s| write_phantom(s, out))?;
        }
    }
    Ok(0)
}
