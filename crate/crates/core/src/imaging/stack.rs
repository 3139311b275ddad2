use std::io::{Read, Write};

use crate::error::{Error, Result};

pub const STACK_MAGIC: &[u8; 5] = b"PSTK1";
const HEADER_LEN: usize = 5 + 4 + 4 + 4 + 8;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct StackHeader {
    pub width: u32,
    pub height: u32,
    pub shots: u32,
    pub seed: u64,
}

impl StackHeader {
    pub fn frame_len(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn write_to<W: Write>(&self, w: &mut W) -> Result<()> {
        let mut buf = Vec::with_capacity(HEADER_LEN);
        buf.extend_from_slice(STACK_MAGIC);
        buf.extend_from_slice(&self.width.to_le_bytes());
        buf.extend_from_slice(&self.height.to_le_bytes());
        buf.extend_from_slice(&self.shots.to_le_bytes());
        buf.extend_from_slice(&self.seed.to_le_bytes());
        w.write_all(&buf)?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: &mut R) -> Result<Self> {
        let mut buf = [0u8; HEADER_LEN];
        r.read_exact(&mut buf)?;
        if &buf[..5] != STACK_MAGIC {
            return Err(Error::Format("missing PSTK1 magic".into()));
        }
        let u32_at = |o: usize| u32::from_le_bytes(buf[o..o + 4].try_into().unwrap());
        let header = Self {
            width: u32_at(5),
            height: u32_at(9),
            shots: u32_at(13),
            seed: u64::from_le_bytes(buf[17..25].try_into().unwrap()),
        };
        if header.width == 0 || header.height == 0 {
            return Err(Error::Format(format!("empty frame {}x{}", header.width, header.height)));
        }
        Ok(header)
    }
}

/// Camera counts of every shot, shot-major.
#[derive(Debug, Clone, PartialEq)]
pub struct ShotStack {
    pub header: StackHeader,
    pub frames: Vec<f32>,
}

impl ShotStack {
    pub fn new(header: StackHeader, frames: Vec<f32>) -> Result<Self> {
        if frames.len() != header.frame_len() * header.shots as usize {
            return Err(Error::Format(format!(
                "{} values for {} shots of {}x{}",
                frames.len(),
                header.shots,
                header.width,
                header.height
            )));
        }
        Ok(Self { header, frames })
    }

    pub fn width(&self) -> usize {
        self.header.width as usize
    }

    pub fn height(&self) -> usize {
        self.header.height as usize
    }

    pub fn shots(&self) -> usize {
        self.header.shots as usize
    }

    pub fn frame(&self, shot: usize) -> &[f32] {
        let n = self.header.frame_len();
        &self.frames[shot * n..(shot + 1) * n]
    }

    /// Counts of pixel `i` over all shots.
    pub fn pixel_series(&self, i: usize) -> Vec<f32> {
        let n = self.header.frame_len();
        (0..self.shots()).map(|t| self.frames[t * n + i]).collect()
    }

    pub fn write_to<W: Write>(&self, w: W) -> Result<()> {
        let mut writer = StackWriter::new(w, self.header)?;
        writer.write_frames(&self.frames)?;
        writer.finish()?;
        Ok(())
    }

    pub fn read_from<R: Read>(r: R) -> Result<Self> {
        let mut reader = StackReader::new(r)?;
        let header = reader.header;
        let mut frames = Vec::with_capacity(header.frame_len() * header.shots as usize);
        while let Some(chunk) = reader.next_chunk(256)? {
            frames.extend_from_slice(&chunk);
        }
        Self::new(header, frames)
    }
}

/// Incremental stack writer; checks that exactly `shots` frames are written.
pub struct StackWriter<W: Write> {
    inner: W,
    header: StackHeader,
    written: usize,
}

impl<W: Write> StackWriter<W> {
    pub fn new(mut inner: W, header: StackHeader) -> Result<Self> {
        header.write_to(&mut inner)?;
        Ok(Self { inner, header, written: 0 })
    }

    /// Appends whole frames.
    pub fn write_frames(&mut self, values: &[f32]) -> Result<()> {
        let n = self.header.frame_len();
        if values.len() % n != 0 {
            return Err(Error::Format(format!("{} values is not a whole number of {n}-pixel frames", values.len())));
        }
        if self.written + values.len() / n > self.header.shots as usize {
            return Err(Error::Format("more frames than declared in the header".into()));
        }
        let mut buf = Vec::with_capacity(values.len() * 4);
        for v in values {
            buf.extend_from_slice(&v.to_le_bytes());
        }
        self.inner.write_all(&buf)?;
        self.written += values.len() / n;
        Ok(())
    }

    pub fn finish(mut self) -> Result<W> {
        if self.written != self.header.shots as usize {
            return Err(Error::Format(format!("wrote {} of {} frames", self.written, self.header.shots)));
        }
        self.inner.flush()?;
        Ok(self.inner)
    }
}

/// Incremental stack reader.
pub struct StackReader<R: Read> {
    inner: R,
    pub header: StackHeader,
    read: usize,
}

impl<R: Read> StackReader<R> {
    pub fn new(mut inner: R) -> Result<Self> {
        let header = StackHeader::read_from(&mut inner)?;
        Ok(Self { inner, header, read: 0 })
    }

    /// Up to `max_shots` further frames, or `None` at the end.
    pub fn next_chunk(&mut self, max_shots: usize) -> Result<Option<Vec<f32>>> {
        let left = self.header.shots as usize - self.read;
        if left == 0 {
            return Ok(None);
        }
        let k = left.min(max_shots.max(1));
        let mut buf = vec![0u8; k * self.header.frame_len() * 4];
        self.inner.read_exact(&mut buf).map_err(|e| Error::Format(format!("truncated stack: {e}")))?;
        self.read += k;
        Ok(Some(buf.chunks_exact(4).map(|b| f32::from_le_bytes(b.try_into().unwrap())).collect()))
    }
}
