//! Simulated contiguous memory plane.
//!
//! All buffers of a run live in one byte array: `M` sample blocks, `M` label
//! blocks, `M` intermediate-result blocks and a single centroid block, in that
//! order. Every block start is `base + id × stride` for its region, and bulk
//! transfers are split into chunks no larger than the transfer cap (8 MiB by
//! default).
//!
//! Two access styles are offered. Streamed access (`stream_*`, `write_stream`)
//! moves a block sequentially in capped chunks and is used for samples, labels
//! and the intermediate results fed to the reducer. Random access (`read_at`,
//! `write_at`) is used for the centroid block and for mappers depositing their
//! intermediate results.
//!
//! Intermediate block wire format, little-endian, `value_bytes == 4`:
//! `k` × u32 counts, then `k·d` × f32 sums (cluster-major), then one f32
//! distortion.

use std::fmt;
use std::ops::Range;

use crate::error::{Error, Result};
use crate::mapper::partition_bounds;
use crate::types::{CentroidSet, PartialAggregate, SampleSet};

/// Default per-transfer cap of a simple-mode DMA transfer: 8 MiB.
pub const SIMPLE_MODE_CAP: u64 = 8 << 20;
/// Bytes per stored label.
pub const LABEL_BYTES: u64 = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Region {
    Samples,
    Labels,
    Intermediates,
    Centroids,
}

impl Region {
    pub const ALL: [Region; 4] = [Region::Samples, Region::Labels, Region::Intermediates, Region::Centroids];

    pub fn name(self) -> &'static str {
        match self {
            Region::Samples => "samples",
            Region::Labels => "labels",
            Region::Intermediates => "intermediates",
            Region::Centroids => "centroids",
        }
    }
}

/// Start address of block `id`: `base + id × length`.
pub fn block_address(base: u64, id: u64, length: u64) -> Result<u64> {
    id.checked_mul(length)
        .and_then(|off| base.checked_add(off))
        .ok_or_else(|| Error::Layout(format!("address overflow: {base} + {id} × {length}")))
}

/// Dense block IDs `0..block_count`.
pub fn assign_global_ids(block_count: u64) -> Vec<u64> {
    (0..block_count).collect()
}

/// Ordered `(offset, length)` chunks covering a transfer.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct TransferPlan {
    pub chunks: Vec<(u64, u64)>,
}

impl TransferPlan {
    pub fn len(&self) -> usize {
        self.chunks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.chunks.is_empty()
    }

    pub fn total_bytes(&self) -> u64 {
        self.chunks.iter().map(|c| c.1).sum()
    }
}

/// Greedy split of `total_bytes` into full `cap`-sized chunks and one remainder.
pub fn plan_transfer(total_bytes: u64, cap: u64) -> Result<TransferPlan> {
    if cap == 0 {
        return Err(Error::config("transfer_cap", "must be at least 1 byte"));
    }
    let mut chunks = Vec::with_capacity(total_bytes.div_ceil(cap) as usize);
    let mut offset = 0;
    while offset < total_bytes {
        let len = cap.min(total_bytes - offset);
        chunks.push((offset, len));
        offset += len;
    }
    Ok(TransferPlan { chunks })
}

/// Placement of one region: blocks at `base + id × stride`, each holding
/// `block_lens[id]` payload bytes (`≤ stride`).
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct RegionLayout {
    pub base: u64,
    pub stride: u64,
    pub block_lens: Vec<u64>,
}

impl RegionLayout {
    pub fn block_count(&self) -> usize {
        self.block_lens.len()
    }

    pub fn block_address(&self, id: usize) -> Result<u64> {
        block_address(self.base, id as u64, self.stride)
    }

    /// Byte range of block `id`'s payload.
    pub fn block_range(&self, id: usize) -> Range<u64> {
        let start = self.base + id as u64 * self.stride;
        start..start + self.block_lens[id]
    }

    /// One past the last byte reserved by the region.
    pub fn end(&self) -> u64 {
        self.base + self.stride * self.block_count() as u64
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct BlockLayout {
    pub n: usize,
    pub d: usize,
    pub k: usize,
    pub m: usize,
    pub value_bytes: u64,
    pub samples: RegionLayout,
    pub labels: RegionLayout,
    pub intermediates: RegionLayout,
    pub centroids: RegionLayout,
}

fn mul(a: u64, b: u64) -> Result<u64> {
    a.checked_mul(b)
        .ok_or_else(|| Error::Layout(format!("size overflow: {a} × {b}")))
}

fn region(base: u64, stride: u64, lens: Vec<u64>) -> Result<RegionLayout> {
    let region = RegionLayout {
        base,
        stride,
        block_lens: lens,
    };
    // end of the last block must be representable
    block_address(base, region.block_count() as u64, stride)?;
    Ok(region)
}

/// Lays out samples, labels, intermediates and centroids back to back.
pub fn build_layout(n: usize, d: usize, k: usize, m: usize, value_bytes: u64) -> Result<BlockLayout> {
    for (field, v) in [("n", n), ("d", d), ("k", k), ("m", m)] {
        if v == 0 {
            return Err(Error::config(field, "must be at least 1"));
        }
    }
    if value_bytes == 0 {
        return Err(Error::config("value_bytes", "must be at least 1"));
    }
    let (d64, k64) = (d as u64, k as u64);
    let rows: Vec<u64> = partition_bounds(n, m)?.iter().map(|b| b.1 as u64).collect();
    let max_rows = n.div_ceil(m) as u64;

    let row_bytes = mul(d64, value_bytes)?;
    let samples = region(
        0,
        mul(max_rows, row_bytes)?,
        rows.iter().map(|r| r * row_bytes).collect(),
    )?;
    let labels = region(
        samples.end(),
        mul(max_rows, LABEL_BYTES)?,
        rows.iter().map(|r| r * LABEL_BYTES).collect(),
    )?;
    let inter_len = mul(
        k64.checked_add(mul(k64, d64)?)
            .and_then(|v| v.checked_add(1))
            .ok_or_else(|| Error::Layout("intermediate block size overflow".into()))?,
        value_bytes,
    )?;
    let intermediates = region(labels.end(), inter_len, vec![inter_len; m])?;
    let cent_len = mul(mul(k64, d64)?, value_bytes)?;
    let centroids = region(intermediates.end(), cent_len, vec![cent_len])?;
    Ok(BlockLayout {
        n,
        d,
        k,
        m,
        value_bytes,
        samples,
        labels,
        intermediates,
        centroids,
    })
}

impl BlockLayout {
    pub fn region(&self, region: Region) -> &RegionLayout {
        match region {
            Region::Samples => &self.samples,
            Region::Labels => &self.labels,
            Region::Intermediates => &self.intermediates,
            Region::Centroids => &self.centroids,
        }
    }

    pub fn total_bytes(&self) -> u64 {
        self.centroids.end()
    }

    /// Fails if the payload ranges of any two blocks overlap.
    pub fn check_disjoint(&self) -> Result<()> {
        let mut ranges: Vec<(Range<u64>, Region, usize)> = Region::ALL
            .iter()
            .flat_map(|&r| {
                let layout = self.region(r);
                (0..layout.block_count()).map(move |id| (layout.block_range(id), r, id))
            })
            .filter(|(range, _, _)| !range.is_empty())
            .collect();
        ranges.sort_by_key(|(range, _, _)| range.start);
        for pair in ranges.windows(2) {
            let (a, ra, ia) = &pair[0];
            let (b, rb, ib) = &pair[1];
            if a.end > b.start {
                return Err(Error::Layout(format!(
                    "{} block {ia} [{}, {}) overlaps {} block {ib} [{}, {})",
                    ra.name(),
                    a.start,
                    a.end,
                    rb.name(),
                    b.start,
                    b.end
                )));
            }
        }
        Ok(())
    }

    /// Byte range spanned by all intermediate blocks.
    pub fn intermediates_span(&self) -> Range<u64> {
        self.intermediates.base..self.intermediates.end()
    }
}

impl fmt::Display for BlockLayout {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(
            f,
            "layout n={} d={} k={} m={} value_bytes={} total_bytes={}",
            self.n,
            self.d,
            self.k,
            self.m,
            self.value_bytes,
            self.total_bytes()
        )?;
        writeln!(f, "{:<14} {:>5} {:>14} {:>12}", "region", "id", "address", "length")?;
        for r in Region::ALL {
            let layout = self.region(r);
            for id in 0..layout.block_count() {
                let range = layout.block_range(id);
                writeln!(
                    f,
                    "{:<14} {:>5} {:>#14x} {:>12}",
                    r.name(),
                    id,
                    range.start,
                    range.end - range.start
                )?;
            }
        }
        Ok(())
    }
}

/// Splits `bytes` into chunks of at most `cap` bytes following [`plan_transfer`].
pub fn stream_chunks(bytes: &[u8], cap: u64) -> Result<impl Iterator<Item = &[u8]>> {
    let plan = plan_transfer(bytes.len() as u64, cap)?;
    Ok(plan
        .chunks
        .into_iter()
        .map(move |(off, len)| &bytes[off as usize..(off + len) as usize]))
}

/// Copies `src` into `dst` chunk by chunk.
pub fn stream_copy(dst: &mut [u8], src: &[u8], cap: u64) -> Result<TransferPlan> {
    if dst.len() < src.len() {
        return Err(Error::Layout(format!(
            "destination of {} bytes cannot hold {} bytes",
            dst.len(),
            src.len()
        )));
    }
    let plan = plan_transfer(src.len() as u64, cap)?;
    for &(off, len) in &plan.chunks {
        let r = off as usize..(off + len) as usize;
        dst[r.clone()].copy_from_slice(&src[r]);
    }
    Ok(plan)
}

pub fn encode_aggregate(agg: &PartialAggregate, dst: &mut [u8]) -> Result<()> {
    let need = (agg.k() + agg.sums.len() + 1) * 4;
    if dst.len() != need {
        return Err(Error::Layout(format!(
            "intermediate block holds {} bytes, aggregate needs {need}",
            dst.len()
        )));
    }
    let mut words = dst.chunks_exact_mut(4);
    for &c in &agg.counts {
        let c = u32::try_from(c).map_err(|_| Error::Layout(format!("count {c} does not fit in 32 bits")))?;
        words.next().unwrap().copy_from_slice(&c.to_le_bytes());
    }
    for s in &agg.sums {
        words.next().unwrap().copy_from_slice(&s.to_le_bytes());
    }
    words.next().unwrap().copy_from_slice(&agg.distortion.to_le_bytes());
    Ok(())
}

pub fn decode_aggregate(src: &[u8], k: usize, d: usize) -> Result<PartialAggregate> {
    if src.len() != (k + k * d + 1) * 4 {
        return Err(Error::Layout(format!(
            "intermediate block of {} bytes does not match k={k} d={d}",
            src.len()
        )));
    }
    let mut words = src.chunks_exact(4).map(|w| [w[0], w[1], w[2], w[3]]);
    let counts = words.by_ref().take(k).map(|w| u32::from_le_bytes(w) as u64).collect();
    let sums = words.by_ref().take(k * d).map(f32::from_le_bytes).collect();
    let distortion = f32::from_le_bytes(words.next().unwrap());
    PartialAggregate::from_parts(counts, sums, distortion, d)
}

fn decode_f32s(bytes: &[u8]) -> Vec<f32> {
    bytes
        .chunks_exact(4)
        .map(|w| f32::from_le_bytes([w[0], w[1], w[2], w[3]]))
        .collect()
}

/// Disjoint views handed out for the map phase.
pub struct MapPhaseViews<'a> {
    pub samples: Vec<&'a [u8]>,
    pub labels: Vec<&'a mut [u8]>,
    pub intermediates: Vec<&'a mut [u8]>,
    pub centroids: &'a [u8],
}

/// The backing store for one clustering run.
#[derive(Debug, Clone)]
pub struct MemoryPlane {
    layout: BlockLayout,
    buf: Vec<u8>,
    cap: u64,
}

impl MemoryPlane {
    pub fn new(layout: BlockLayout, cap: u64) -> Result<Self> {
        if layout.value_bytes != 4 {
            return Err(Error::Layout(format!(
                "memory plane stores single-precision values, got value_bytes={}",
                layout.value_bytes
            )));
        }
        if cap == 0 {
            return Err(Error::config("transfer_cap", "must be at least 1 byte"));
        }
        let total = usize::try_from(layout.total_bytes())
            .map_err(|_| Error::Layout(format!("{} bytes exceed the address space", layout.total_bytes())))?;
        Ok(Self {
            layout,
            buf: vec![0; total],
            cap,
        })
    }

    /// Plane without any block layout, for raw transfers.
    pub fn raw(bytes: usize, cap: u64) -> Result<Self> {
        let mut plane = Self::new(build_layout(1, 1, 1, 1, 4)?, cap)?;
        plane.buf = vec![0; bytes];
        Ok(plane)
    }

    pub fn layout(&self) -> &BlockLayout {
        &self.layout
    }

    pub fn transfer_cap(&self) -> u64 {
        self.cap
    }

    pub fn len(&self) -> usize {
        self.buf.len()
    }

    pub fn is_empty(&self) -> bool {
        self.buf.is_empty()
    }

    fn range(&self, addr: u64, len: u64) -> Result<Range<usize>> {
        let end = addr
            .checked_add(len)
            .filter(|&e| e <= self.buf.len() as u64)
            .ok_or_else(|| Error::Layout(format!("access [{addr}, +{len}) outside plane of {} bytes", self.buf.len())))?;
        Ok(addr as usize..end as usize)
    }

    pub fn read_at(&self, addr: u64, len: u64) -> Result<&[u8]> {
        let r = self.range(addr, len)?;
        Ok(&self.buf[r])
    }

    pub fn write_at(&mut self, addr: u64, bytes: &[u8]) -> Result<()> {
        let r = self.range(addr, bytes.len() as u64)?;
        self.buf[r].copy_from_slice(bytes);
        Ok(())
    }

    /// Chunked sequential write starting at `addr`.
    pub fn write_stream(&mut self, addr: u64, bytes: &[u8]) -> Result<TransferPlan> {
        let r = self.range(addr, bytes.len() as u64)?;
        stream_copy(&mut self.buf[r], bytes, self.cap)
    }

    /// Chunked sequential read of `len` bytes starting at `addr`.
    pub fn stream_read(&self, addr: u64, len: u64) -> Result<impl Iterator<Item = &[u8]>> {
        let r = self.range(addr, len)?;
        stream_chunks(&self.buf[r], self.cap)
    }

    pub fn read_stream(&self, addr: u64, len: u64) -> Result<Vec<u8>> {
        let mut out = Vec::with_capacity(len as usize);
        for chunk in self.stream_read(addr, len)? {
            out.extend_from_slice(chunk);
        }
        Ok(out)
    }

    /// Streams each sample partition into its block.
    pub fn load_samples(&mut self, samples: &SampleSet) -> Result<()> {
        if samples.n() != self.layout.n || samples.d() != self.layout.d {
            return Err(Error::Contract(format!(
                "samples are {}×{}, layout expects {}×{}",
                samples.n(),
                samples.d(),
                self.layout.n,
                self.layout.d
            )));
        }
        let bounds = partition_bounds(self.layout.n, self.layout.m)?;
        for (id, (off, len)) in bounds.into_iter().enumerate() {
            let bytes: Vec<u8> = samples.range(off, len).iter().flat_map(|v| v.to_le_bytes()).collect();
            let addr = self.layout.samples.block_address(id)?;
            self.write_stream(addr, &bytes)?;
        }
        Ok(())
    }

    pub fn centroid_address(&self) -> u64 {
        self.layout.centroids.base
    }

    /// Overwrites the single centroid block in place.
    pub fn write_centroids(&mut self, centroids: &CentroidSet) -> Result<()> {
        if centroids.k() != self.layout.k || centroids.d() != self.layout.d {
            return Err(Error::Contract(format!(
                "centroids are {}×{}, layout expects {}×{}",
                centroids.k(),
                centroids.d(),
                self.layout.k,
                self.layout.d
            )));
        }
        let bytes: Vec<u8> = centroids.as_slice().iter().flat_map(|v| v.to_le_bytes()).collect();
        self.write_at(self.centroid_address(), &bytes)
    }

    pub fn read_centroids(&self) -> Result<CentroidSet> {
        let r = self.layout.centroids.block_range(0);
        let bytes = self.read_at(r.start, r.end - r.start)?;
        CentroidSet::new(decode_f32s(bytes), self.layout.d)
    }

    /// Label blocks concatenated in block-ID order.
    pub fn read_labels(&self) -> Result<Vec<u32>> {
        let mut labels = Vec::with_capacity(self.layout.n);
        for id in 0..self.layout.labels.block_count() {
            let r = self.layout.labels.block_range(id);
            let bytes = self.read_stream(r.start, r.end - r.start)?;
            labels.extend(bytes.chunks_exact(4).map(|w| u32::from_le_bytes([w[0], w[1], w[2], w[3]])));
        }
        Ok(labels)
    }

    /// Streams the contiguous intermediate region and decodes one aggregate
    /// per mapper, in mapper order.
    pub fn read_intermediates(&self) -> Result<Vec<PartialAggregate>> {
        let span = self.layout.intermediates_span();
        let stream = self.read_stream(span.start, span.end - span.start)?;
        let stride = self.layout.intermediates.stride as usize;
        stream
            .chunks_exact(stride)
            .map(|block| decode_aggregate(block, self.layout.k, self.layout.d))
            .collect()
    }

    /// Splits the plane into per-mapper views: read-only sample blocks and
    /// centroid block, writable label and intermediate blocks.
    pub fn map_phase_views(&mut self) -> MapPhaseViews<'_> {
        let layout = &self.layout;
        let (samples_region, rest) = self.buf.split_at_mut(layout.labels.base as usize);
        let (labels_region, rest) = rest.split_at_mut((layout.intermediates.base - layout.labels.base) as usize);
        let (inter_region, cent_region) =
            rest.split_at_mut((layout.centroids.base - layout.intermediates.base) as usize);

        let samples = (0..layout.m)
            .map(|id| {
                let r = layout.samples.block_range(id);
                &samples_region[r.start as usize..r.end as usize]
            })
            .collect();
        let labels = split_blocks(labels_region, &layout.labels);
        let intermediates = split_blocks(inter_region, &layout.intermediates);
        let c = layout.centroids.block_range(0);
        let off = layout.centroids.base;
        MapPhaseViews {
            samples,
            labels,
            intermediates,
            centroids: &cent_region[(c.start - off) as usize..(c.end - off) as usize],
        }
    }
}

fn split_blocks<'a>(mut region: &'a mut [u8], layout: &RegionLayout) -> Vec<&'a mut [u8]> {
    let mut out = Vec::with_capacity(layout.block_count());
    for &len in &layout.block_lens {
        let (block, rest) = std::mem::take(&mut region).split_at_mut(layout.stride as usize);
        out.push(&mut block[..len as usize]);
        region = rest;
    }
    out
}
