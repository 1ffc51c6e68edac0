//! Reconstruction metrics, rectangular-region evaluation, and FK-domain
//! comparison reports. Metrics are computed on the real component only.

use serde::{Deserialize, Serialize};
use std::io::Write;
use std::path::Path;

use crate::complex::ComplexTensor;
use crate::error::{Error, Result};
use crate::grid::Array2D;
use crate::model::{Autoencoder, Domain};
use crate::signal::{analytic, fk, FKSpectrum, Trace};
use crate::tensor::Tensor4;

/// Rectangular evaluation window, `[start, end)` in traces and samples.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct Region {
    pub name: String,
    pub traces: [usize; 2],
    pub times: [usize; 2],
}

impl Region {
    pub fn validate(&self, rows: usize, cols: usize) -> Result<()> {
        let ok = self.traces[0] < self.traces[1]
            && self.times[0] < self.times[1]
            && self.traces[1] <= rows
            && self.times[1] <= cols;
        if !ok {
            return Err(Error::Config(format!(
                "region {:?} (traces {:?}, times {:?}) is empty or outside the {rows}x{cols} section",
                self.name, self.traces, self.times
            )));
        }
        Ok(())
    }
}

/// Root mean square difference.
pub fn rms(a: &Array2D, b: &Array2D) -> Result<f64> {
    check_same(a, b, "rms")?;
    let n = a.data().len() as f64;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y) * (x - y)).sum();
    Ok((s / n).sqrt())
}

/// Mean absolute difference.
pub fn mae(a: &Array2D, b: &Array2D) -> Result<f64> {
    check_same(a, b, "mae")?;
    let n = a.data().len() as f64;
    let s: f64 = a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum();
    Ok(s / n)
}

fn check_same(a: &Array2D, b: &Array2D, what: &str) -> Result<()> {
    if a.rows() != b.rows() || a.cols() != b.cols() {
        return Err(Error::Shape(format!(
            "{what}: sections {}x{} and {}x{} differ",
            a.rows(),
            a.cols(),
            b.rows(),
            b.cols()
        )));
    }
    Ok(())
}

/// Anything that can reconstruct a `(trace, time)` section.
pub trait Reconstructor {
    fn label(&self) -> String;
    fn reconstruct(&self, section: &Array2D) -> Result<Array2D>;
}

/// Reflect-pads on the bottom/right edges up to `(rows, cols)`.
pub fn reflect_pad(section: &Array2D, rows: usize, cols: usize) -> Result<Array2D> {
    let (r0, c0) = (section.rows(), section.cols());
    if rows < r0 || cols < c0 {
        return Err(Error::Shape("reflect_pad target smaller than the section".into()));
    }
    if rows - r0 >= r0 || cols - c0 >= c0 {
        return Err(Error::Shape(format!(
            "section {r0}x{c0} too small to reflect-pad to {rows}x{cols}"
        )));
    }
    Ok(Array2D::from_fn(rows, cols, |r, c| {
        let rr = if r < r0 { r } else { 2 * r0 - 2 - r };
        let cc = if c < c0 { c } else { 2 * c0 - 2 - c };
        section.at(rr, cc)
    }))
}

fn next_multiple(n: usize, div: usize) -> usize {
    n.div_ceil(div) * div
}

impl Reconstructor for Autoencoder {
    fn label(&self) -> String {
        self.spec().name.clone()
    }

    /// Runs the section through the network in inference mode,
    /// reflect-padding to the required divisibility and cropping back.
    /// Complex models receive the per-trace analytic signal; the
    /// subtracted trace means are restored in the output.
    fn reconstruct(&self, section: &Array2D) -> Result<Array2D> {
        let div = self.spec().spatial_divisor();
        let (rows, cols) = (section.rows(), section.cols());
        let padded = if rows % div == 0 && cols % div == 0 {
            section.clone()
        } else {
            reflect_pad(section, next_multiple(rows, div), next_multiple(cols, div))?
        };
        let (pr, pc) = (padded.rows(), padded.cols());
        let out = match self.domain() {
            Domain::Real => {
                let x = Tensor4::from_vec((1, 1, pr, pc), padded.data().to_vec())?;
                let y = self.infer_real(&x)?;
                Array2D::from_vec(pr, pc, y.into_data())?
            }
            Domain::Complex => {
                let mut re = Tensor4::zeros((1, 1, pr, pc));
                let mut im = Tensor4::zeros((1, 1, pr, pc));
                let mut means = Vec::with_capacity(pr);
                for r in 0..pr {
                    let a = analytic(&Trace::new(padded.row(r).to_vec(), 1.0)?)?;
                    re.plane_mut(0, 0)[r * pc..(r + 1) * pc].copy_from_slice(&a.re);
                    im.plane_mut(0, 0)[r * pc..(r + 1) * pc].copy_from_slice(&a.im);
                    means.push(a.mean);
                }
                let y = self.infer_complex(&ComplexTensor::new(re, im)?)?;
                let mut out = Array2D::from_vec(pr, pc, y.re.into_data())?;
                for r in 0..pr {
                    let mean = means[r];
                    for v in out.row_mut(r) {
                        *v += mean;
                    }
                }
                out
            }
        };
        Ok(Array2D::from_fn(rows, cols, |r, c| out.at(r, c)))
    }
}

#[derive(Clone, Debug, Serialize)]
pub struct RegionMetrics {
    pub name: String,
    pub rms: f64,
    pub mae: f64,
}

#[derive(Clone, Debug, Serialize)]
pub struct MetricReport {
    pub model: String,
    pub global: RegionMetrics,
    pub regions: Vec<RegionMetrics>,
}

impl MetricReport {
    pub fn to_csv(&self) -> String {
        let mut out = String::from("region,rms,mae\n");
        out.push_str(&format!("global,{},{}\n", self.global.rms, self.global.mae));
        for r in &self.regions {
            out.push_str(&format!("{},{},{}\n", r.name, r.rms, r.mae));
        }
        out
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serialization")
    }
}

fn crop(section: &Array2D, region: &Region) -> Array2D {
    Array2D::from_fn(
        region.traces[1] - region.traces[0],
        region.times[1] - region.times[0],
        |r, c| section.at(region.traces[0] + r, region.times[0] + c),
    )
}

/// Reconstructs the section and reports global plus per-region RMS/MAE
/// against the input, on the real component.
pub fn evaluate_model(
    recon: &impl Reconstructor,
    section: &Array2D,
    regions: &[Region],
) -> Result<MetricReport> {
    for region in regions {
        region.validate(section.rows(), section.cols())?;
    }
    let output = recon.reconstruct(section)?;
    check_same(section, &output, "evaluate_model")?;
    let global = RegionMetrics {
        name: "global".into(),
        rms: rms(section, &output)?,
        mae: mae(section, &output)?,
    };
    let mut region_metrics = Vec::with_capacity(regions.len());
    for region in regions {
        let a = crop(section, region);
        let b = crop(&output, region);
        region_metrics.push(RegionMetrics {
            name: region.name.clone(),
            rms: rms(&a, &b)?,
            mae: mae(&a, &b)?,
        });
    }
    Ok(MetricReport { model: recon.label(), global, regions: region_metrics })
}

/// Energy below / at-or-above the split frequency.
#[derive(Clone, Copy, Debug, Serialize)]
pub struct BandEnergy {
    pub below: f64,
    pub above: f64,
}

impl BandEnergy {
    /// Share of total energy sitting above the split.
    pub fn high_share(&self) -> f64 {
        self.above / (self.below + self.above)
    }
}

/// Paired FK spectra with their difference and band-energy summary.
pub struct FkReport {
    pub original: FKSpectrum,
    pub reconstruction: FKSpectrum,
    /// original minus reconstruction amplitude.
    pub difference: Array2D,
    pub split_hz: f64,
    pub original_band: BandEnergy,
    pub reconstruction_band: BandEnergy,
}

/// FK spectra of the original and the reconstruction plus an amplitude
/// difference map and band energies split at `split_hz`.
pub fn fk_report(
    original: &Array2D,
    reconstruction: &Array2D,
    dt: f64,
    dx: f64,
    split_hz: f64,
) -> Result<FkReport> {
    check_same(original, reconstruction, "fk_report")?;
    let orig = fk(original, dt, dx)?;
    let recon = fk(reconstruction, dt, dx)?;
    let difference = Array2D::from_vec(
        orig.amplitude.rows(),
        orig.amplitude.cols(),
        orig.amplitude
            .data()
            .iter()
            .zip(recon.amplitude.data())
            .map(|(a, b)| a - b)
            .collect(),
    )?;
    let ob = orig.band_energy(split_hz);
    let rb = recon.band_energy(split_hz);
    Ok(FkReport {
        original: orig,
        reconstruction: recon,
        difference,
        split_hz,
        original_band: BandEnergy { below: ob.0, above: ob.1 },
        reconstruction_band: BandEnergy { below: rb.0, above: rb.1 },
    })
}

/// 8-bit binary PGM quick-look: linear amplitude, max-normalized.
pub fn write_pgm(path: &Path, image: &Array2D) -> Result<()> {
    let max = image.max_abs();
    let scale = if max > 0.0 { 255.0 / max } else { 0.0 };
    let mut out = Vec::with_capacity(32 + image.data().len());
    out.extend_from_slice(format!("P5\n{} {}\n255\n", image.cols(), image.rows()).as_bytes());
    for v in image.data() {
        out.push((v.abs() * scale).round().min(255.0) as u8);
    }
    let mut f = std::fs::File::create(path)?;
    f.write_all(&out)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build, ArchitectureSpec, Preset};

    struct IdentityStub;
    impl Reconstructor for IdentityStub {
        fn label(&self) -> String {
            "identity".into()
        }
        fn reconstruct(&self, section: &Array2D) -> Result<Array2D> {
            Ok(section.clone())
        }
    }

    struct ZeroStub;
    impl Reconstructor for ZeroStub {
        fn label(&self) -> String {
            "zeros".into()
        }
        fn reconstruct(&self, section: &Array2D) -> Result<Array2D> {
            Ok(Array2D::zeros(section.rows(), section.cols()))
        }
    }

    fn wavy(rows: usize, cols: usize) -> Array2D {
        Array2D::from_fn(rows, cols, |r, c| {
            ((r as f64 * 0.31).sin() + (c as f64 * 0.17).cos()) * 0.4
        })
    }

    #[test]
    fn metric_identities() {
        let a = wavy(8, 8);
        assert_eq!(rms(&a, &a).unwrap(), 0.0);
        assert_eq!(mae(&a, &a).unwrap(), 0.0);
        let mut b = a.clone();
        for v in b.data_mut() {
            *v += 0.5;
        }
        assert!((rms(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        assert!((mae(&a, &b).unwrap() - 0.5).abs() < 1e-12);
        // symmetry
        let c = wavy(8, 8);
        let mut d = c.clone();
        d.data_mut()[5] = 3.0;
        assert_eq!(rms(&c, &d).unwrap(), rms(&d, &c).unwrap());
        assert_eq!(mae(&c, &d).unwrap(), mae(&d, &c).unwrap());
        assert!(rms(&a, &Array2D::zeros(4, 4)).is_err());
    }

    #[test]
    fn metrics_match_direct_recomputation() {
        let a = wavy(6, 9);
        let b = Array2D::from_fn(6, 9, |r, c| a.at(r, c) + ((r * 9 + c) as f64 * 0.01) - 0.2);
        let n = 54.0;
        let want_rms = (a
            .data()
            .iter()
            .zip(b.data())
            .map(|(x, y)| (x - y) * (x - y))
            .sum::<f64>()
            / n)
            .sqrt();
        let want_mae =
            a.data().iter().zip(b.data()).map(|(x, y)| (x - y).abs()).sum::<f64>() / n;
        assert!((rms(&a, &b).unwrap() - want_rms).abs() < 1e-15);
        assert!((mae(&a, &b).unwrap() - want_mae).abs() < 1e-15);
    }

    #[test]
    fn identity_stub_scores_zero_everywhere() {
        let section = wavy(32, 32);
        let regions = vec![Region { name: "top".into(), traces: [0, 8], times: [0, 16] }];
        let report = evaluate_model(&IdentityStub, &section, &regions).unwrap();
        assert_eq!(report.global.rms, 0.0);
        assert_eq!(report.global.mae, 0.0);
        assert_eq!(report.regions[0].rms, 0.0);
    }

    #[test]
    fn zero_stub_scores_section_rms() {
        let section = wavy(16, 16);
        let report = evaluate_model(&ZeroStub, &section, &[]).unwrap();
        let want = (section.data().iter().map(|v| v * v).sum::<f64>() / 256.0).sqrt();
        assert!((report.global.rms - want).abs() < 1e-12);
    }

    #[test]
    fn out_of_bounds_region_rejected_by_name() {
        let section = wavy(16, 16);
        let regions = vec![Region { name: "broken".into(), traces: [0, 32], times: [0, 8] }];
        let err = evaluate_model(&IdentityStub, &section, &regions).unwrap_err();
        assert!(err.to_string().contains("broken"), "{err}");
    }

    #[test]
    fn disjoint_exhaustive_regions_recombine_to_global() {
        let section = wavy(16, 16);
        let recon = Array2D::from_fn(16, 16, |r, c| section.at(r, c) * 0.8 + 0.01);
        let regions = vec![
            Region { name: "a".into(), traces: [0, 8], times: [0, 16] },
            Region { name: "b".into(), traces: [8, 16], times: [0, 16] },
        ];
        struct Fixed(Array2D);
        impl Reconstructor for Fixed {
            fn label(&self) -> String {
                "fixed".into()
            }
            fn reconstruct(&self, _: &Array2D) -> Result<Array2D> {
                Ok(self.0.clone())
            }
        }
        let report = evaluate_model(&Fixed(recon), &section, &regions).unwrap();
        let combined: f64 = report
            .regions
            .iter()
            .map(|r| r.rms * r.rms * 128.0)
            .sum::<f64>()
            / 256.0;
        assert!((combined - report.global.rms * report.global.rms).abs() < 1e-12);
    }

    #[test]
    fn pad_and_crop_is_identity_for_divisible_sections() {
        let model = build(&ArchitectureSpec::preset(Preset::RSmall), 9).unwrap();
        let section = wavy(32, 32);
        let direct = {
            let x = Tensor4::from_vec((1, 1, 32, 32), section.data().to_vec()).unwrap();
            let y = model.infer_real(&x).unwrap();
            Array2D::from_vec(32, 32, y.into_data()).unwrap()
        };
        let via_reconstruct = model.reconstruct(&section).unwrap();
        assert_eq!(direct.data(), via_reconstruct.data());
    }

    #[test]
    fn indivisible_sections_pad_and_crop_back() {
        let model = build(&ArchitectureSpec::preset(Preset::RSmall), 9).unwrap();
        let section = wavy(40, 56);
        let out = model.reconstruct(&section).unwrap();
        assert_eq!((out.rows(), out.cols()), (40, 56));
        assert!(out.is_finite());
    }

    #[test]
    fn complex_model_reconstructs_with_mean_restoration() {
        let model = build(&ArchitectureSpec::preset(Preset::CSmall), 9).unwrap();
        let mut section = wavy(32, 32);
        for v in section.data_mut() {
            *v += 0.3;
        }
        let out = model.reconstruct(&section).unwrap();
        assert_eq!((out.rows(), out.cols()), (32, 32));
        // untrained model emits tanh(0)=0 before mean restoration, so
        // each output row sits near the input row mean
        let row_mean: f64 = section.row(0).iter().sum::<f64>() / 32.0;
        let out_mean: f64 = out.row(0).iter().sum::<f64>() / 32.0;
        assert!((row_mean - out_mean).abs() < 0.2);
    }

    #[test]
    fn fk_report_difference_behaviour() {
        let section = wavy(16, 32);
        let report = fk_report(&section, &section, 0.004, 25.0, 50.0).unwrap();
        assert!(report.difference.data().iter().all(|&v| v == 0.0));

        let zeros = Array2D::zeros(16, 32);
        let report = fk_report(&section, &zeros, 0.004, 25.0, 50.0).unwrap();
        for (d, o) in report.difference.data().iter().zip(report.original.amplitude.data()) {
            assert!((d - o).abs() < 1e-15);
        }
    }

    #[test]
    fn low_pass_reconstruction_loses_high_band_share() {
        use std::f64::consts::PI;
        let (rows, cols) = (16, 64);
        let dt = 0.004;
        // low (30 Hz) plus high (90 Hz) component
        let low = |r: usize, c: usize| {
            (2.0 * PI * 30.0 * c as f64 * dt + r as f64 * 0.3).sin()
        };
        let section = Array2D::from_fn(rows, cols, |r, c| {
            low(r, c) + 0.8 * (2.0 * PI * 90.0 * c as f64 * dt + r as f64).sin()
        });
        let filtered = Array2D::from_fn(rows, cols, low);
        let report = fk_report(&section, &filtered, dt, 25.0, 50.0).unwrap();
        assert!(
            report.reconstruction_band.high_share() < report.original_band.high_share(),
            "high-band share should drop: {} vs {}",
            report.reconstruction_band.high_share(),
            report.original_band.high_share()
        );
    }

    #[test]
    fn pgm_has_correct_header_and_size() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("q.pgm");
        let img = wavy(10, 20);
        write_pgm(&path, &img).unwrap();
        let bytes = std::fs::read(&path).unwrap();
        let header = b"P5\n20 10\n255\n";
        assert!(bytes.starts_with(header));
        assert_eq!(bytes.len(), header.len() + 200);
    }
}
