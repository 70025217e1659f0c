use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{cross_leakage, Branch, CrossLeakageConfig, TransmitterConfig, WfeError};
use crate::channel::{
    transmissivity, AtmosphereProfile, ChannelGeometry, ChannelRealization, GridPlan, Propagator,
};
use crate::grid::{wrap_phase, WavefrontField, C64};
use crate::optics::{hg_mode_field, HgBasisSpec, ModeSpectrum, SampledBasis};

/// Channel block of an experiment.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChannelConfig {
    /// Profile template; its `cn2_ground` is replaced by each draw.
    pub profile: AtmosphereProfile,
    /// Uniform sampling range of the ground-level C²_n.
    pub cn2_range: [f64; 2],
    /// Transmitted beam waist w0, m.
    pub beam_waist: f64,
    pub receiver_radius: f64,
    pub detector_efficiency: f64,
    pub grid: usize,
    pub screen_budget: usize,
}

impl Default for ChannelConfig {
    fn default() -> Self {
        Self {
            profile: AtmosphereProfile::downlink(1.0e-14),
            cn2_range: [1.7e-15, 1.0e-14],
            beam_waist: 0.15,
            receiver_radius: 1.25,
            detector_efficiency: 0.95,
            grid: 256,
            screen_budget: crate::channel::DEFAULT_SCREEN_BUDGET,
        }
    }
}

impl ChannelConfig {
    /// Same geometry with every turbulence source switched off.
    pub fn vacuum() -> Self {
        Self { profile: AtmosphereProfile::vacuum(), cn2_range: [0.0, 0.0], ..Self::default() }
    }

    pub fn validate(&self) -> Result<(), WfeError> {
        self.profile.validate()?;
        let [lo, hi] = self.cn2_range;
        if !(lo >= 0.0 && hi >= lo && hi.is_finite()) {
            return Err(WfeError::InvalidConfig(format!("cn2_range [{lo}, {hi}]")));
        }
        if !(self.beam_waist > 0.0 && self.receiver_radius > 0.0) {
            return Err(WfeError::InvalidConfig("beam waist and receiver radius must be > 0".into()));
        }
        if !(self.detector_efficiency > 0.0 && self.detector_efficiency <= 1.0) {
            return Err(WfeError::InvalidConfig("detector efficiency must lie in (0, 1]".into()));
        }
        if self.screen_budget == 0 {
            return Err(WfeError::InvalidConfig("screen budget must be >= 1".into()));
        }
        Ok(())
    }

    pub fn grid_plan(&self) -> GridPlan {
        GridPlan::for_beam(self.grid, self.beam_waist, self.profile.wavelength, self.profile.path_length())
    }
}

/// One pulse type measured at the receiver.
#[derive(Clone, Debug)]
pub struct Measured {
    /// Receiver field restricted to the aperture.
    pub field: WavefrontField,
    pub spectrum: ModeSpectrum,
    /// Mode phases relative to the vacuum-propagated beam, wrapped.
    pub phases: Vec<f64>,
    pub transmissivity: f64,
}

#[derive(Clone, Debug)]
pub struct InstanceOutcome {
    pub seed: u64,
    pub cn2_ground: f64,
    pub screens: usize,
    /// Channel transmissivity seen by the unaberrated beam.
    pub transmissivity: f64,
    /// Beam without transmitter aberrations.
    pub clean: Option<Measured>,
    pub reference: Option<Measured>,
    pub signal: Option<Measured>,
}

/// One Monte-Carlo record.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PulsePairRecord {
    pub phases_r: Vec<f64>,
    pub phases_s: Vec<f64>,
    /// Signal phases before leakage.
    pub theta_s: Vec<f64>,
    pub amps_r: Vec<f64>,
    pub amps_s: Vec<f64>,
    pub t: f64,
    pub case_id: u8,
    pub seed: u64,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Dataset {
    pub n_modes: usize,
    pub case_id: u8,
    /// The first `n_train` records form the training split.
    pub n_train: usize,
    pub records: Vec<PulsePairRecord>,
}

impl Dataset {
    pub fn train(&self) -> &[PulsePairRecord] {
        &self.records[..self.n_train]
    }

    pub fn test(&self) -> &[PulsePairRecord] {
        &self.records[self.n_train..]
    }
}

/// Fields needed to score reconstructions of one test instance.
#[derive(Clone, Debug)]
pub struct SignalFields {
    /// True signal field over the aperture, leakage included.
    pub true_field: WavefrontField,
    /// Measured signal spectrum, leakage included.
    pub signal: ModeSpectrum,
    pub reference: ModeSpectrum,
}

fn check_case(case_id: u8) -> Result<(), WfeError> {
    if case_id > 3 {
        return Err(WfeError::InvalidCase(case_id));
    }
    Ok(())
}

/// Precomputed state shared by all instances of an experiment.
pub struct Simulator {
    channel: ChannelConfig,
    plan: GridPlan,
    basis: SampledBasis,
    tx_clean: WavefrontField,
    tx_reference: WavefrontField,
    tx_signal: WavefrontField,
    reference_phases: Vec<f64>,
}

impl Simulator {
    pub fn new(channel: &ChannelConfig, transmitter: &TransmitterConfig, n_modes: usize) -> Result<Self, WfeError> {
        channel.validate()?;
        transmitter.validate()?;
        let profile = &channel.profile;
        let plan = channel.grid_plan();
        let length = profile.path_length();
        let spec = HgBasisSpec::new(channel.beam_waist, 0.0, profile.wavelength, n_modes)?;
        let vacuum = ChannelGeometry::new(&plan, profile.wavelength, length, &[])?;
        let basis = SampledBasis::new(&spec, vacuum.receiver_geometry(), length)?;

        let tx_clean = hg_mode_field(&spec, 0, 0, vacuum.source_geometry(), 0.0)?;
        let tx_reference = super::apply_transmit_wfes(&tx_clean, Branch::Reference, transmitter)?;
        let tx_signal = super::apply_transmit_wfes(&tx_clean, Branch::Signal, transmitter)?;

        let out = Propagator::new(plan.n).run(&tx_clean, &vacuum, None)?;
        let c = basis.decompose(&out.field.masked(channel.receiver_radius))?;
        let reference_phases = c.coeffs.iter().map(|v| v.arg()).collect();
        Ok(Self { channel: channel.clone(), plan, basis, tx_clean, tx_reference, tx_signal, reference_phases })
    }

    pub fn basis(&self) -> &SampledBasis {
        &self.basis
    }

    pub fn n_modes(&self) -> usize {
        self.basis.spec().len()
    }

    /// Mode phases of the undistorted beam after vacuum propagation. Modes
    /// the vacuum beam does not excite keep a fixed, arbitrary value.
    pub fn reference_phases(&self) -> &[f64] {
        &self.reference_phases
    }

    pub fn channel(&self) -> &ChannelConfig {
        &self.channel
    }

    /// Draws Cn2_0 and a channel from `seed` and sends the requested beams
    /// through the same realization.
    pub fn run_instance(
        &self,
        propagator: &Propagator,
        seed: u64,
        case_id: u8,
    ) -> Result<InstanceOutcome, WfeError> {
        self.run_instance_inner(propagator, seed, case_id, true)
    }

    /// With `need_t` false, cases 1 and 2 skip the clean-beam propagation and
    /// report T = NaN.
    fn run_instance_inner(
        &self,
        propagator: &Propagator,
        seed: u64,
        case_id: u8,
        need_t: bool,
    ) -> Result<InstanceOutcome, WfeError> {
        check_case(case_id)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let [lo, hi] = self.channel.cn2_range;
        let cn2_ground = if hi > lo { rng.gen_range(lo..=hi) } else { lo };
        let screen_seed: u64 = rng.gen();
        let profile = AtmosphereProfile { cn2_ground, ..self.channel.profile.clone() };
        let realization =
            ChannelRealization::generate(&profile, &self.plan, self.channel.screen_budget, screen_seed)?;

        let measure = |tx: &WavefrontField| -> Result<Measured, WfeError> {
            let out = propagator.run(tx, &realization.geometry, Some(&realization.screens))?;
            let t = transmissivity(&out.field, tx, self.channel.receiver_radius, self.channel.detector_efficiency);
            let field = out.field.masked(self.channel.receiver_radius);
            let spectrum = self.basis.decompose(&field)?;
            let phases = spectrum
                .coeffs
                .iter()
                .zip(&self.reference_phases)
                .map(|(c, r)| wrap_phase(c.arg() - r))
                .collect();
            Ok(Measured { field, spectrum, phases, transmissivity: t })
        };
        let (clean, reference, signal) = if matches!(case_id, 0 | 3) {
            (Some(measure(&self.tx_clean)?), None, None)
        } else {
            (None, Some(measure(&self.tx_reference)?), Some(measure(&self.tx_signal)?))
        };
        let transmissivity = match &clean {
            Some(c) => c.transmissivity,
            None if !need_t => f64::NAN,
            None => {
                let out = propagator.run(&self.tx_clean, &realization.geometry, Some(&realization.screens))?;
                transmissivity(&out.field, &self.tx_clean, self.channel.receiver_radius, self.channel.detector_efficiency)
            }
        };
        Ok(InstanceOutcome {
            seed,
            cn2_ground,
            screens: realization.screen_count(),
            transmissivity,
            clean,
            reference,
            signal,
        })
    }

    /// Transmit WFE phases (Θ_R, Θ_S), amplitudes and channel T of one draw.
    #[allow(clippy::type_complexity)]
    pub fn transmit_and_decompose(
        &self,
        seed: u64,
    ) -> Result<(Vec<f64>, Vec<f64>, Vec<f64>, Vec<f64>, f64), WfeError> {
        let o = self.run_instance(&Propagator::new(self.plan.n), seed, 1)?;
        let (r, s) = (o.reference.unwrap(), o.signal.unwrap());
        Ok((r.phases, s.phases, r.spectrum.amplitudes(), s.spectrum.amplitudes(), o.transmissivity))
    }

    /// Regenerates the instance and returns the fields scored by coherent
    /// efficiency.
    pub fn signal_fields(
        &self,
        propagator: &Propagator,
        seed: u64,
        case_id: u8,
        leakage: &CrossLeakageConfig,
    ) -> Result<SignalFields, WfeError> {
        let o = self.run_instance_inner(propagator, seed, case_id, false)?;
        let (reference, signal) = match case_id {
            0 | 3 => {
                let c = o.clean.unwrap();
                (c.clone(), c)
            }
            _ => (o.reference.unwrap(), o.signal.unwrap()),
        };
        if matches!(case_id, 0 | 1) {
            return Ok(SignalFields {
                true_field: signal.field,
                signal: signal.spectrum,
                reference: reference.spectrum,
            });
        }
        let x = cross_leakage(&reference.phases, leakage)?;
        let delta: Vec<C64> = signal
            .spectrum
            .coeffs
            .iter()
            .zip(&x)
            .map(|(c, xk)| c * (C64::from_polar(1.0, *xk) - 1.0))
            .collect();
        let extra = self.basis.reconstruct(&ModeSpectrum::new(signal.spectrum.basis.clone(), delta)?)?;
        let mut true_field = signal.field.clone();
        for (t, e) in true_field.data.iter_mut().zip(&extra.data) {
            *t += e;
        }
        let true_field = true_field.masked(self.channel.receiver_radius);
        let coeffs = signal.spectrum.coeffs.iter().zip(&x).map(|(c, xk)| c * C64::from_polar(1.0, *xk)).collect();
        Ok(SignalFields {
            true_field,
            signal: ModeSpectrum::new(signal.spectrum.basis.clone(), coeffs)?,
            reference: reference.spectrum,
        })
    }

    pub fn new_propagator(&self) -> Propagator {
        Propagator::new(self.plan.n)
    }

    /// The untouched transmitted beam.
    pub fn transmitted(&self) -> &WavefrontField {
        &self.tx_clean
    }
}

/// Applies the case equations to one measured instance.
pub fn build_case_record(
    case_id: u8,
    outcome: &InstanceOutcome,
    leakage: &CrossLeakageConfig,
) -> Result<PulsePairRecord, WfeError> {
    check_case(case_id)?;
    let missing = || WfeError::InvalidConfig(format!("instance lacks the beams needed for case {case_id}"));
    let record = |r: &Measured, s: &Measured, phases_s: Vec<f64>| PulsePairRecord {
        phases_r: r.phases.clone(),
        phases_s,
        theta_s: s.phases.clone(),
        amps_r: r.spectrum.amplitudes(),
        amps_s: s.spectrum.amplitudes(),
        t: outcome.transmissivity,
        case_id,
        seed: outcome.seed,
    };
    let with_leak = |r: &Measured, s: &Measured| -> Result<Vec<f64>, WfeError> {
        let x = cross_leakage(&r.phases, leakage)?;
        Ok(s.phases.iter().zip(&x).map(|(p, xk)| wrap_phase(p + xk)).collect())
    };
    Ok(match case_id {
        0 => {
            let c = outcome.clean.as_ref().ok_or_else(missing)?;
            record(c, c, c.phases.clone())
        }
        3 => {
            let c = outcome.clean.as_ref().ok_or_else(missing)?;
            record(c, c, with_leak(c, c)?)
        }
        _ => {
            let r = outcome.reference.as_ref().ok_or_else(missing)?;
            let s = outcome.signal.as_ref().ok_or_else(missing)?;
            let phases_s = if case_id == 2 { with_leak(r, s)? } else { s.phases.clone() };
            record(r, s, phases_s)
        }
    })
}

/// Number of training records for a split fraction.
pub fn split_count(count: usize, split: f64) -> Result<usize, WfeError> {
    if count < 2 {
        return Err(WfeError::InvalidConfig(format!("need at least 2 instances, got {count}")));
    }
    if !(split > 0.0 && split < 1.0) {
        return Err(WfeError::InvalidConfig(format!("split {split} outside (0, 1)")));
    }
    Ok(((count as f64 * split).round() as usize).clamp(1, count - 1))
}

/// Instances `base_seed + i` for `i < count`, in order.
pub fn generate_dataset(
    sim: &Simulator,
    case_id: u8,
    count: usize,
    split: f64,
    base_seed: u64,
    leakage: &CrossLeakageConfig,
) -> Result<Dataset, WfeError> {
    check_case(case_id)?;
    let n_train = split_count(count, split)?;
    if leakage.n != sim.n_modes() {
        return Err(WfeError::Dimension { expected: sim.n_modes(), got: leakage.n });
    }
    let records = (0..count as u64)
        .into_par_iter()
        .map_init(
            || sim.new_propagator(),
            |prop, i| {
                let seed = base_seed.wrapping_add(i);
                let o = sim.run_instance(prop, seed, case_id)?;
                build_case_record(case_id, &o, leakage)
            },
        )
        .collect::<Result<Vec<_>, _>>()?;
    Ok(Dataset { n_modes: sim.n_modes(), case_id, n_train, records })
}
