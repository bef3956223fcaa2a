//! The marginal likelihood in ν for a few fixed core spectra, and where the
//! fitted weight lands.
use coreshrink::ebshrink::{fit_weight_from_eigs, log_marginal};
use coreshrink::spdlinalg::Dims;

fn main() -> Result<(), coreshrink::Error> {
    let dims = Dims::new(2, 2)?;
    let n = 10;
    let spectra: [(&str, [f64; 4]); 3] = [
        ("flat", [1.0, 1.0, 1.0, 1.0]),
        ("mild", [1.4, 1.1, 0.9, 0.6]),
        ("spread", [2.0, 1.5, 0.4, 0.1]),
    ];
    for (name, eigs) in spectra {
        let fit = fit_weight_from_eigs(&eigs, n, dims)?;
        print!("{name:>6}: nu_hat = {:<12.6} w_hat = {:.6} |", fit.nu_hat, fit.w_hat);
        for nu in [6.0, 20.0, 100.0, 1e4] {
            print!(" logL({nu}) = {:.4}", log_marginal(nu, &eigs, n, dims)?);
        }
        println!();
    }
    Ok(())
}
