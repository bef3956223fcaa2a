//! A small risk study over prior ν and sample size, written as CSV.
use coreshrink::kroncore::KcdOptions;
use coreshrink::randmat::Seed;
use coreshrink::simharness::{run_study, summarize, write_summary_csv, SimConfig};
use coreshrink::spdlinalg::Dims;

fn main() -> Result<(), coreshrink::Error> {
    let dims = Dims::new(3, 3)?;
    let p = dims.p() as f64;
    let config = SimConfig {
        dims,
        nu_list: vec![p + 2.0, 3.0 * p + 1.0, f64::INFINITY],
        n_list: vec![5, 20],
        reps: 20,
        seed: Seed(2024),
        kcd: KcdOptions::default(),
        threads: None,
    };
    let records = run_study(&config)?;
    let summary = summarize(&records)?;
    write_summary_csv(std::io::stdout().lock(), &summary)?;
    Ok(())
}
