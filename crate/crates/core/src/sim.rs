//! Event-level simulation of the uplink: device populations, time-indexed
//! event streams, per-location decoding outcomes and decoding logs.
//!
//! Decoding of a repetition at a location does not depend on which base
//! stations are listening, only on the repetition, its interferers and the
//! fading on each link. [`DecodeField`] therefore evaluates every counted
//! repetition at every candidate site once; any assignment (or any sequence
//! of training phases) is then replayed against that fixed realization.

use rand::{Rng, RngCore, SeedableRng};

use crate::assignment::AssignmentMatrix;
use crate::error::{Error, Result};
use crate::geometry::{sample_hppp, AreaRegion, Location, NetworkLayout};
use crate::log::{DecodingLog, PacketOutcome};
use crate::rng::{Fading, RayleighFading, SimRng};
use crate::traffic::{
    generate_incumbent_events_in, generate_iot_events_in, relative_power, ChannelParams,
    IncumbentProfile, SourceKind, TimeWindow, TrafficProfile, TransmissionEvent,
};

/// Everything about the radio environment except device positions.
#[derive(Debug, Clone, PartialEq)]
pub struct RadioEnvironment {
    pub traffic: TrafficProfile,
    pub incumbents: IncumbentProfile,
    pub channel: ChannelParams,
}

impl RadioEnvironment {
    pub fn validate(&self) -> Result<()> {
        self.traffic.validate()?;
        self.incumbents.validate()?;
        self.channel.validate()?;
        if self.incumbents.band_pmf.len() != self.traffic.num_bands {
            return Err(Error::ShapeMismatch(format!(
                "incumbent PMF has {} bands, traffic has {}",
                self.incumbents.band_pmf.len(),
                self.traffic.num_bands
            )));
        }
        Ok(())
    }

    /// Longest span of one packet, IoT or incumbent.
    fn packet_span(&self) -> f64 {
        let iot = self.traffic.repetitions as f64 * self.traffic.packet_duration_s;
        let inc = self.incumbents.repetitions as f64 * self.incumbents.packet_duration_s;
        iot.max(inc)
    }
}

/// Fixed positions of IoT and incumbent devices.
#[derive(Debug, Clone, PartialEq)]
pub struct Population {
    pub iot: Vec<Location>,
    pub incumbents: Vec<Location>,
}

impl Population {
    pub fn sample<R: Rng + ?Sized>(
        region: &AreaRegion,
        iot_density: f64,
        incumbent_density: f64,
        rng: &mut R,
    ) -> Result<Self> {
        Ok(Self {
            iot: sample_hppp(iot_density, region, rng)?,
            incumbents: sample_hppp(incumbent_density, region, rng)?,
        })
    }
}

/// Events sorted by start time with an index of the complete IoT packets
/// that fall inside the observation horizon.
#[derive(Debug, Clone)]
pub struct EventStream {
    events: Vec<TransmissionEvent>,
    max_duration: f64,
    repetitions: usize,
    /// Positions into `events`, `repetitions` per counted packet.
    packet_reps: Vec<u32>,
    horizon: f64,
}

impl EventStream {
    /// Generates traffic for `[0, horizon]`. Arrivals are drawn over a window
    /// padded by one packet span on each side so that edge repetitions see
    /// the same interference as the rest; only packets lying entirely inside
    /// the horizon are counted.
    pub fn generate<R1: Rng + ?Sized, R2: Rng + ?Sized>(
        env: &RadioEnvironment,
        population: &Population,
        horizon: f64,
        iot_rng: &mut R1,
        incumbent_rng: &mut R2,
    ) -> Result<Self> {
        env.validate()?;
        if !(horizon > 0.0) {
            return Err(crate::error::invalid("horizon", "must be positive"));
        }
        let pad = env.packet_span();
        let window = TimeWindow::new(-pad, horizon + pad);
        let mut events = generate_iot_events_in(&env.traffic, &population.iot, window, 0, iot_rng)?;
        let next = events.len() as u64;
        events.extend(generate_incumbent_events_in(
            &env.incumbents,
            env.traffic.band_width_hz,
            &population.incumbents,
            window,
            next,
            incumbent_rng,
        )?);
        Ok(Self::from_events(
            events,
            env.traffic.repetitions as usize,
            horizon,
        ))
    }

    /// Indexes an arbitrary event list. IoT packets are grouped by
    /// (device, packet index) and counted when all `repetitions` are present
    /// and inside `[0, horizon]`.
    pub fn from_events(
        mut events: Vec<TransmissionEvent>,
        repetitions: usize,
        horizon: f64,
    ) -> Self {
        events.sort_by(|a, b| a.start_time.total_cmp(&b.start_time).then(a.id.cmp(&b.id)));
        let max_duration = events.iter().map(|e| e.duration).fold(0.0, f64::max);

        let mut iot: Vec<(u32, u32, u32, u32)> = events
            .iter()
            .enumerate()
            .filter(|(_, e)| e.kind == SourceKind::Iot)
            .map(|(pos, e)| (e.device_id, e.packet_index, e.repetition_index, pos as u32))
            .collect();
        iot.sort_unstable();
        let mut packet_reps = Vec::new();
        let mut i = 0;
        while i < iot.len() {
            let mut j = i;
            while j < iot.len() && iot[j].0 == iot[i].0 && iot[j].1 == iot[i].1 {
                j += 1;
            }
            let group = &iot[i..j];
            let complete = group.len() == repetitions
                && group.iter().all(|g| {
                    let e = &events[g.3 as usize];
                    e.start_time >= 0.0 && e.end_time() <= horizon
                });
            if complete {
                packet_reps.extend(group.iter().map(|g| g.3));
            }
            i = j;
        }
        Self {
            events,
            max_duration,
            repetitions,
            packet_reps,
            horizon,
        }
    }

    pub fn events(&self) -> &[TransmissionEvent] {
        &self.events
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn num_packets(&self) -> usize {
        self.packet_reps.len() / self.repetitions.max(1)
    }

    /// Positions of the counted repetitions, packet-major.
    pub fn counted_positions(&self) -> &[u32] {
        &self.packet_reps
    }

    /// Positions of every event colliding with the event at `pos`.
    pub fn interferers_into(&self, pos: usize, out: &mut Vec<usize>) {
        out.clear();
        let target = &self.events[pos];
        let earliest = target.start_time - self.max_duration;
        let first = self.events.partition_point(|e| e.start_time <= earliest);
        for (k, e) in self.events[first..].iter().enumerate() {
            if e.start_time >= target.end_time() {
                break;
            }
            let k = first + k;
            if k != pos && target.is_interfered_by(e) {
                out.push(k);
            }
        }
    }

    fn sinr_with<F: Fading + ?Sized>(
        &self,
        pos: usize,
        interferers: &[usize],
        receiver: &Location,
        receiver_key: u64,
        fading: &F,
        channel: &ChannelParams,
    ) -> Result<f64> {
        let target = &self.events[pos];
        let d2 = target.source.squared_distance_to(receiver);
        if d2 == 0.0 {
            return Err(Error::SingularGeometry);
        }
        let signal = fading.gain(target.id, receiver_key) * channel.path_gain(d2);
        let mut denom = channel.noise_ratio;
        for &k in interferers {
            let e = &self.events[k];
            let d2 = e.source.squared_distance_to(receiver);
            denom += relative_power(e, channel)
                * fading.gain(e.id, receiver_key)
                * channel.path_gain(d2);
        }
        Ok(signal / denom)
    }

    /// SINR of every counted repetition (packet-major) at one receiver.
    pub fn sinr_samples<F: Fading + ?Sized>(
        &self,
        receiver: &Location,
        receiver_key: u64,
        fading: &F,
        channel: &ChannelParams,
    ) -> Result<Vec<f64>> {
        let mut scratch = Vec::new();
        self.packet_reps
            .iter()
            .map(|&pos| {
                self.interferers_into(pos as usize, &mut scratch);
                self.sinr_with(
                    pos as usize,
                    &scratch,
                    receiver,
                    receiver_key,
                    fading,
                    channel,
                )
            })
            .collect()
    }

    /// Band of each counted repetition, packet-major.
    pub fn counted_bands(&self) -> Vec<usize> {
        self.packet_reps
            .iter()
            .map(|&p| self.events[p as usize].band)
            .collect()
    }
}

/// Which band each site listens to and whether its decodes count toward the
/// packet decoding probability (temporary stations do not).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Listening {
    pub bands: Vec<Option<usize>>,
    pub contributes: Vec<bool>,
}

impl Listening {
    /// Every site listed contributes.
    pub fn all_contributing(bands: Vec<Option<usize>>) -> Self {
        let contributes = vec![true; bands.len()];
        Self { bands, contributes }
    }

    /// Sites of a placement assignment followed by `temporary` sites that only
    /// record.
    pub fn from_assignment(assignment: &AssignmentMatrix, temporary: &[Option<usize>]) -> Self {
        let mut bands = assignment.rows().to_vec();
        let mut contributes = vec![true; bands.len()];
        bands.extend_from_slice(temporary);
        contributes.extend(std::iter::repeat_n(false, temporary.len()));
        Self { bands, contributes }
    }

    fn listeners_by_band(&self, num_bands: usize) -> Vec<Vec<usize>> {
        let mut by_band = vec![Vec::new(); num_bands];
        for (b, band) in self.bands.iter().enumerate() {
            if let Some(m) = band {
                by_band[*m].push(b);
            }
        }
        by_band
    }
}

/// One training or evaluation phase: a time window with a fixed assignment.
#[derive(Debug, Clone, PartialEq)]
pub struct Phase {
    pub window: TimeWindow,
    pub listening: Listening,
}

/// Packet and repetition decoding probabilities of one assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Outcome {
    pub pdp: f64,
    pub tdp: f64,
    pub packets: usize,
}

/// Which sites decode each counted repetition.
#[derive(Debug, Clone)]
pub struct DecodeField {
    num_sites: usize,
    num_bands: usize,
    repetitions: usize,
    horizon: f64,
    rep_band: Vec<u8>,
    rep_start: Vec<f64>,
    offsets: Vec<u32>,
    decoders: Vec<u16>,
    /// Decoder sets as bit masks, filled when there are at most 64 sites.
    masks: Vec<u64>,
}

impl DecodeField {
    /// Evaluates every counted repetition of `stream` at every site. Site `i`
    /// uses fading receiver key `i`.
    pub fn compute<F: Fading + ?Sized>(
        stream: &EventStream,
        sites: &[Location],
        num_bands: usize,
        fading: &F,
        channel: &ChannelParams,
    ) -> Result<Self> {
        if sites.len() > u16::MAX as usize {
            return Err(Error::ShapeMismatch("too many sites".into()));
        }
        if num_bands > u8::MAX as usize {
            return Err(Error::ShapeMismatch("too many bands".into()));
        }
        let reps = stream.counted_positions();
        let mut rep_band = Vec::with_capacity(reps.len());
        let mut rep_start = Vec::with_capacity(reps.len());
        let mut offsets = Vec::with_capacity(reps.len() + 1);
        let mut decoders = Vec::new();
        let mut scratch = Vec::new();
        offsets.push(0);
        for &pos in reps {
            let pos = pos as usize;
            let event = &stream.events[pos];
            rep_band.push(event.band as u8);
            rep_start.push(event.start_time);
            stream.interferers_into(pos, &mut scratch);
            for (s, site) in sites.iter().enumerate() {
                let sinr = stream.sinr_with(pos, &scratch, site, s as u64, fading, channel)?;
                if sinr > channel.decode_threshold {
                    decoders.push(s as u16);
                }
            }
            offsets.push(decoders.len() as u32);
        }
        let masks = if sites.len() <= 64 {
            offsets
                .windows(2)
                .map(|w| {
                    decoders[w[0] as usize..w[1] as usize]
                        .iter()
                        .fold(0u64, |acc, &s| acc | (1u64 << s))
                })
                .collect()
        } else {
            Vec::new()
        };
        Ok(Self {
            num_sites: sites.len(),
            num_bands,
            repetitions: stream.repetitions,
            horizon: stream.horizon,
            rep_band,
            rep_start,
            offsets,
            decoders,
            masks,
        })
    }

    pub fn num_sites(&self) -> usize {
        self.num_sites
    }

    pub fn num_bands(&self) -> usize {
        self.num_bands
    }

    pub fn repetitions(&self) -> usize {
        self.repetitions
    }

    pub fn num_packets(&self) -> usize {
        self.rep_band.len() / self.repetitions.max(1)
    }

    pub fn num_repetitions(&self) -> usize {
        self.rep_band.len()
    }

    pub fn horizon(&self) -> f64 {
        self.horizon
    }

    pub fn band(&self, rep: usize) -> usize {
        self.rep_band[rep] as usize
    }

    pub fn start(&self, rep: usize) -> f64 {
        self.rep_start[rep]
    }

    /// Sites whose SINR exceeded the threshold for repetition `rep`.
    pub fn decoders(&self, rep: usize) -> &[u16] {
        &self.decoders[self.offsets[rep] as usize..self.offsets[rep + 1] as usize]
    }

    /// PDP and TDP when `listening` is held for the whole horizon.
    pub fn outcome(&self, listening: &Listening) -> Outcome {
        self.outcome_in(listening, TimeWindow::new(f64::NEG_INFINITY, f64::INFINITY))
    }

    /// PDP and TDP over the packets whose repetitions all start in `window`.
    pub fn outcome_in(&self, listening: &Listening, window: TimeWindow) -> Outcome {
        let r = self.repetitions;
        let band_masks: Option<Vec<u64>> =
            (!self.masks.is_empty() || self.num_sites == 0).then(|| {
                let mut m = vec![0u64; self.num_bands];
                for (s, band) in listening.bands.iter().enumerate() {
                    if let (Some(b), true) = (band, listening.contributes[s]) {
                        m[*b] |= 1 << s;
                    }
                }
                m
            });
        let (mut packets, mut packets_decoded, mut reps_decoded) = (0usize, 0usize, 0usize);
        for p in 0..self.num_packets() {
            let reps = p * r..(p + 1) * r;
            if !reps.clone().all(|rep| window.contains(self.rep_start[rep])) {
                continue;
            }
            packets += 1;
            let mut any = false;
            for rep in reps {
                let m = self.band(rep);
                let hit = match &band_masks {
                    Some(bm) => self.masks.get(rep).is_some_and(|&d| d & bm[m] != 0),
                    None => self.decoders(rep).iter().any(|&s| {
                        let s = s as usize;
                        listening.contributes[s] && listening.bands[s] == Some(m)
                    }),
                };
                if hit {
                    reps_decoded += 1;
                    any = true;
                }
            }
            packets_decoded += usize::from(any);
        }
        Outcome {
            pdp: if packets > 0 {
                packets_decoded as f64 / packets as f64
            } else {
                0.0
            },
            tdp: if packets > 0 {
                reps_decoded as f64 / (packets * r) as f64
            } else {
                0.0
            },
            packets,
        }
    }

    /// Builds the decoding log for a sequence of phases. Each repetition is
    /// attributed to the phase containing its start time; packets with a
    /// repetition outside every phase are left out of the packet outcomes.
    pub fn log(&self, phases: &[Phase]) -> DecodingLog {
        let mut log = DecodingLog::new(self.num_sites, self.num_bands);
        let by_band: Vec<Vec<Vec<usize>>> = phases
            .iter()
            .map(|ph| ph.listening.listeners_by_band(self.num_bands))
            .collect();
        let mut rep_counts = vec![vec![0u64; self.num_bands]; phases.len()];
        let mut heard = Vec::new();
        let r = self.repetitions;
        for p in 0..self.num_packets() {
            let mut complete = true;
            let mut decoded = 0u32;
            for rep in p * r..(p + 1) * r {
                let t = self.rep_start[rep];
                let Some(k) = phases.iter().position(|ph| ph.window.contains(t)) else {
                    complete = false;
                    continue;
                };
                let m = self.band(rep);
                rep_counts[k][m] += 1;
                let listening = &phases[k].listening;
                heard.clear();
                heard.extend(
                    self.decoders(rep)
                        .iter()
                        .map(|&s| s as usize)
                        .filter(|&s| listening.bands[s] == Some(m)),
                );
                for (i, &a) in heard.iter().enumerate() {
                    log.site_mut(a, m).decoded += 1;
                    for &b in &heard[i + 1..] {
                        log.pair_mut(a, b, m).joint += 1;
                    }
                }
                if heard.iter().any(|&s| listening.contributes[s]) {
                    decoded += 1;
                }
            }
            if complete {
                log.packets.push(PacketOutcome {
                    repetitions: r as u32,
                    decoded,
                });
            }
        }
        for (k, listeners) in by_band.iter().enumerate() {
            for (m, sites) in listeners.iter().enumerate() {
                let n = rep_counts[k][m];
                for (i, &a) in sites.iter().enumerate() {
                    log.site_mut(a, m).observed += n;
                    for &b in &sites[i + 1..] {
                        log.pair_mut(a, b, m).observed += n;
                    }
                }
            }
        }
        log.horizon_s = phases.iter().map(|ph| ph.window.length()).sum();
        log.assignments = phases.iter().map(|ph| ph.listening.bands.clone()).collect();
        log
    }

    /// Log for a single assignment held over the full horizon.
    pub fn log_single(&self, listening: &Listening) -> DecodingLog {
        self.log(&[Phase {
            window: TimeWindow::new(f64::NEG_INFINITY, f64::INFINITY),
            listening: listening.clone(),
        }])
    }
}

/// Checks that an assignment fits the layout and the placement constraints.
pub fn check_assignment(layout: &NetworkLayout, assignment: &AssignmentMatrix) -> Result<()> {
    let rows = layout.num_installed() + layout.num_candidates();
    if assignment.num_rows() != rows || assignment.num_installed() != layout.num_installed() {
        return Err(Error::InfeasibleAssignment(format!(
            "assignment has {} rows ({} installed), layout has {} ({} installed)",
            assignment.num_rows(),
            assignment.num_installed(),
            rows,
            layout.num_installed()
        )));
    }
    assignment.validate(assignment.placed_candidates())
}

/// Samples devices, generates one horizon of traffic and records the
/// decoding log of `assignment`. Temporary stations listen on
/// `temporary_bands` but never count toward packet decoding.
#[allow(clippy::too_many_arguments)]
pub fn run_simulation<R: RngCore>(
    layout: &NetworkLayout,
    assignment: &AssignmentMatrix,
    temporary_bands: &[Option<usize>],
    env: &RadioEnvironment,
    iot_density: f64,
    incumbent_density: f64,
    horizon: f64,
    rng: &mut R,
) -> Result<DecodingLog> {
    check_assignment(layout, assignment)?;
    if temporary_bands.len() != layout.temporary.len() {
        return Err(Error::ShapeMismatch(format!(
            "{} temporary bands for {} temporary sites",
            temporary_bands.len(),
            layout.temporary.len()
        )));
    }
    if assignment.num_bands() != env.traffic.num_bands {
        return Err(Error::ShapeMismatch(
            "assignment band count differs from traffic".into(),
        ));
    }
    let population = Population::sample(&layout.region, iot_density, incumbent_density, rng)?;
    let fading = RayleighFading::new(rng.next_u64());
    let mut iot_rng = SimRng::seed_from_u64(rng.next_u64());
    let mut incumbent_rng = SimRng::seed_from_u64(rng.next_u64());
    let stream =
        EventStream::generate(env, &population, horizon, &mut iot_rng, &mut incumbent_rng)?;
    let field = DecodeField::compute(
        &stream,
        &layout.all_sites(),
        env.traffic.num_bands,
        &fading,
        &env.channel,
    )?;
    let mut log = field.log_single(&Listening::from_assignment(assignment, temporary_bands));
    log.horizon_s = horizon;
    Ok(log)
}
