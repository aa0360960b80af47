//! Query/reference traverses, ground truth, and synthetic descriptor datasets.

use std::cmp::Ordering;
use std::collections::BTreeSet;
use std::fs;
use std::path::{Path, PathBuf};

use image::{DynamicImage, GrayImage};
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};

use crate::descriptor::{Descriptor, DescriptorSet};
use crate::error::{Error, Result};

/// Extensions accepted by [`load_image_set`] when the caller has no preference.
pub const DEFAULT_EXTENSIONS: &[&str] = &["png", "jpg", "jpeg"];

/// One traverse: grayscale frames in traversal order.
#[derive(Debug, Clone)]
pub struct ImageSet {
    frames: Vec<GrayImage>,
    source_paths: Vec<PathBuf>,
}

impl ImageSet {
    pub fn from_frames(frames: Vec<GrayImage>, source_paths: Vec<PathBuf>) -> Result<Self> {
        if frames.is_empty() {
            return Err(Error::InvalidArgument("image set needs at least one frame".into()));
        }
        if frames.len() != source_paths.len() {
            return Err(Error::InvalidArgument(format!(
                "{} frames but {} source paths",
                frames.len(),
                source_paths.len()
            )));
        }
        Ok(Self {
            frames,
            source_paths,
        })
    }

    pub fn frames(&self) -> &[GrayImage] {
        &self.frames
    }

    pub fn source_paths(&self) -> &[PathBuf] {
        &self.source_paths
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }
}

/// Compares two names treating runs of ASCII digits as numbers, so `img2`
/// sorts before `img10`. Falls back to plain byte order to stay total.
pub fn natural_cmp(a: &str, b: &str) -> Ordering {
    let (mut x, mut y) = (a.as_bytes(), b.as_bytes());
    loop {
        match (x.first(), y.first()) {
            (None, None) => return a.cmp(b),
            (None, Some(_)) => return Ordering::Less,
            (Some(_), None) => return Ordering::Greater,
            (Some(cx), Some(cy)) if cx.is_ascii_digit() && cy.is_ascii_digit() => {
                let nx = x.iter().take_while(|c| c.is_ascii_digit()).count();
                let ny = y.iter().take_while(|c| c.is_ascii_digit()).count();
                let dx = strip_leading_zeros(&x[..nx]);
                let dy = strip_leading_zeros(&y[..ny]);
                let ord = dx.len().cmp(&dy.len()).then_with(|| dx.cmp(dy));
                if ord != Ordering::Equal {
                    return ord;
                }
                x = &x[nx..];
                y = &y[ny..];
            }
            (Some(cx), Some(cy)) => {
                if cx != cy {
                    return cx.cmp(cy);
                }
                x = &x[1..];
                y = &y[1..];
            }
        }
    }
}

fn strip_leading_zeros(digits: &[u8]) -> &[u8] {
    let zeros = digits.iter().take_while(|&&c| c == b'0').count();
    &digits[zeros..]
}

/// Converts any decoded image to 8-bit grayscale with BT.601 luma weights.
pub fn to_gray_bt601(image: &DynamicImage) -> GrayImage {
    match image {
        DynamicImage::ImageLuma8(gray) => gray.clone(),
        other => {
            let rgb = other.to_rgb8();
            GrayImage::from_fn(rgb.width(), rgb.height(), |x, y| {
                let [r, g, b] = rgb.get_pixel(x, y).0;
                let luma = 0.299 * f64::from(r) + 0.587 * f64::from(g) + 0.114 * f64::from(b);
                image::Luma([luma.round().clamp(0.0, 255.0) as u8])
            })
        }
    }
}

/// Lists the files in `directory` whose extension (case-insensitive) is in
/// `extensions`, in numeric-aware filename order.
pub fn list_frames(directory: &Path, extensions: &[&str]) -> Result<Vec<PathBuf>> {
    let wanted: BTreeSet<String> = extensions.iter().map(|e| e.to_ascii_lowercase()).collect();
    let entries = fs::read_dir(directory).map_err(|e| Error::io(directory, e))?;
    let mut paths = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(directory, e))?.path();
        if !path.is_file() {
            continue;
        }
        let matches = path
            .extension()
            .and_then(|e| e.to_str())
            .is_some_and(|e| wanted.contains(&e.to_ascii_lowercase()));
        if matches {
            paths.push(path);
        }
    }
    paths.sort_by(|a, b| {
        let na = a.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
        let nb = b.file_name().map(|n| n.to_string_lossy()).unwrap_or_default();
        natural_cmp(&na, &nb)
    });
    Ok(paths)
}

/// Loads every matching image in `directory` as grayscale, in traversal order.
pub fn load_image_set(directory: &Path, extensions: &[&str]) -> Result<ImageSet> {
    let paths = list_frames(directory, extensions)?;
    if paths.is_empty() {
        return Err(Error::NoFrames(directory.to_path_buf()));
    }
    let frames = paths
        .iter()
        .map(|path| {
            let decoded = image::open(path).map_err(|e| Error::Decode {
                path: path.clone(),
                message: e.to_string(),
            })?;
            Ok(to_gray_bt601(&decoded))
        })
        .collect::<Result<Vec<_>>>()?;
    ImageSet::from_frames(frames, paths)
}

/// Inclusive range of reference indices accepted as a correct match.
#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct RefRange {
    pub lo: usize,
    pub hi: usize,
}

impl RefRange {
    pub fn contains(&self, index: usize) -> bool {
        self.lo <= index && index <= self.hi
    }
}

/// Per-query acceptable reference ranges.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct GroundTruth {
    entries: Vec<RefRange>,
    num_refs: usize,
    /// Frame tolerance when the ground truth was derived from index alignment.
    tolerance: Option<usize>,
}

impl GroundTruth {
    pub fn new(entries: Vec<RefRange>, num_refs: usize) -> Result<Self> {
        for (i, r) in entries.iter().enumerate() {
            if r.hi < r.lo {
                return Err(Error::GroundTruth(format!(
                    "query {i}: hi {} < lo {}",
                    r.hi, r.lo
                )));
            }
            if r.hi >= num_refs {
                return Err(Error::GroundTruth(format!(
                    "query {i}: out-of-range reference index {} (num_refs = {num_refs})",
                    r.hi
                )));
            }
        }
        Ok(Self {
            entries,
            num_refs,
            tolerance: None,
        })
    }

    pub fn entries(&self) -> &[RefRange] {
        &self.entries
    }

    pub fn get(&self, query: usize) -> Option<RefRange> {
        self.entries.get(query).copied()
    }

    pub fn num_queries(&self) -> usize {
        self.entries.len()
    }

    pub fn num_refs(&self) -> usize {
        self.num_refs
    }

    pub fn tolerance(&self) -> Option<usize> {
        self.tolerance
    }
}

/// Reads `query_index,ref_lo,ref_hi` rows. A header row is allowed.
pub fn load_ground_truth(csv_path: &Path, num_queries: usize, num_refs: usize) -> Result<GroundTruth> {
    let file = fs::File::open(csv_path).map_err(|e| Error::io(csv_path, e))?;
    parse_ground_truth(file, num_queries, num_refs)
}

pub fn parse_ground_truth<R: std::io::Read>(
    reader: R,
    num_queries: usize,
    num_refs: usize,
) -> Result<GroundTruth> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let mut slots: Vec<Option<RefRange>> = vec![None; num_queries];
    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        if record.len() != 3 {
            return Err(Error::GroundTruth(format!(
                "row {}: expected 3 columns, found {}",
                row + 1,
                record.len()
            )));
        }
        let parsed: Vec<Option<usize>> = record.iter().map(|f| f.parse().ok()).collect();
        let (q, lo, hi) = match parsed[..] {
            [Some(q), Some(lo), Some(hi)] => (q, lo, hi),
            // header line
            _ if row == 0 => continue,
            _ => {
                return Err(Error::GroundTruth(format!(
                    "row {}: expected non-negative integers",
                    row + 1
                )))
            }
        };
        if q >= num_queries || lo >= num_refs || hi >= num_refs {
            return Err(Error::GroundTruth(format!(
                "row {}: out-of-range index ({q},{lo},{hi}) for {num_queries} queries, {num_refs} refs",
                row + 1
            )));
        }
        if hi < lo {
            return Err(Error::GroundTruth(format!("row {}: hi {hi} < lo {lo}", row + 1)));
        }
        if slots[q].is_some() {
            return Err(Error::GroundTruth(format!("duplicate query index {q}")));
        }
        slots[q] = Some(RefRange { lo, hi });
    }
    let entries = slots
        .into_iter()
        .enumerate()
        .map(|(q, s)| s.ok_or_else(|| Error::GroundTruth(format!("missing entry for query {q}"))))
        .collect::<Result<Vec<_>>>()?;
    GroundTruth::new(entries, num_refs)
}

/// Ground truth for frame-aligned traverses: query `i` matches references
/// `i - tolerance ..= i + tolerance`, clipped to the reference range.
pub fn aligned_ground_truth(num_queries: usize, num_refs: usize, tolerance: usize) -> Result<GroundTruth> {
    if num_queries > num_refs {
        return Err(Error::InvalidArgument(format!(
            "aligned ground truth needs num_queries ({num_queries}) <= num_refs ({num_refs})"
        )));
    }
    let entries = (0..num_queries)
        .map(|i| RefRange {
            lo: i.saturating_sub(tolerance),
            hi: (i + tolerance).min(num_refs - 1),
        })
        .collect();
    let mut gt = GroundTruth::new(entries, num_refs)?;
    gt.tolerance = Some(tolerance);
    Ok(gt)
}

pub struct SyntheticDataset {
    pub queries: DescriptorSet,
    pub references: DescriptorSet,
    pub ground_truth: GroundTruth,
}

/// Builds a one-hot place dataset: reference `i` is the basis vector `e_i`,
/// query `i` is `e_i` plus isotropic Gaussian noise, L2-normalised.
pub fn generate_synthetic(
    num_places: usize,
    dim: usize,
    noise_sigma: f64,
    seed: u64,
) -> Result<SyntheticDataset> {
    if num_places == 0 {
        return Err(Error::InvalidArgument("num_places must be >= 1".into()));
    }
    if dim < num_places {
        return Err(Error::InvalidArgument(format!(
            "dim ({dim}) must be >= num_places ({num_places})"
        )));
    }
    if !(noise_sigma >= 0.0 && noise_sigma.is_finite()) {
        return Err(Error::InvalidArgument(format!(
            "noise_sigma must be finite and >= 0, got {noise_sigma}"
        )));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut references = Vec::with_capacity(num_places);
    let mut queries = Vec::with_capacity(num_places);
    for i in 0..num_places {
        let mut basis = vec![0.0f32; dim];
        basis[i] = 1.0;
        references.push(Descriptor::new(basis)?);

        let mut q: Vec<f64> = (0..dim)
            .map(|_| {
                let z: f64 = StandardNormal.sample(&mut rng);
                noise_sigma * z
            })
            .collect();
        q[i] += 1.0;
        let norm = q.iter().map(|v| v * v).sum::<f64>().sqrt();
        let q = if norm > 0.0 {
            q.iter().map(|v| (v / norm) as f32).collect()
        } else {
            vec![0.0; dim]
        };
        queries.push(Descriptor::new(q)?);
    }

    Ok(SyntheticDataset {
        queries: DescriptorSet::new("synthetic", queries, 0.0)?,
        references: DescriptorSet::new("synthetic", references, 0.0)?,
        ground_truth: aligned_ground_truth(num_places, num_places, 0)?,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn natural_order_puts_img10_after_img2() {
        let mut names = vec!["img2.png", "img10.png", "img1.png"];
        names.sort_by(|a, b| natural_cmp(a, b));
        assert_eq!(names, ["img1.png", "img2.png", "img10.png"]);
    }

    #[test]
    fn natural_order_handles_zero_padding() {
        assert_eq!(natural_cmp("frame007.png", "frame7.png"), Ordering::Less);
        assert_eq!(natural_cmp("frame007.png", "frame8.png"), Ordering::Less);
        assert_eq!(natural_cmp("a", "a1"), Ordering::Less);
    }

    #[test]
    fn load_orders_numerically_and_rejects_empty() {
        let dir = tempfile::tempdir().unwrap();
        assert!(matches!(
            load_image_set(dir.path(), DEFAULT_EXTENSIONS),
            Err(Error::NoFrames(_))
        ));
        for (name, value) in [("img2.png", 2u8), ("img10.png", 10), ("img1.png", 1)] {
            GrayImage::from_pixel(4, 3, image::Luma([value]))
                .save(dir.path().join(name))
                .unwrap();
        }
        fs::write(dir.path().join("notes.txt"), "ignored").unwrap();
        let set = load_image_set(dir.path(), DEFAULT_EXTENSIONS).unwrap();
        let names: Vec<_> = set
            .source_paths()
            .iter()
            .map(|p| p.file_name().unwrap().to_string_lossy().into_owned())
            .collect();
        assert_eq!(names, ["img1.png", "img2.png", "img10.png"]);
        let firsts: Vec<u8> = set.frames().iter().map(|f| f.get_pixel(0, 0).0[0]).collect();
        assert_eq!(firsts, [1, 2, 10]);

        let again = load_image_set(dir.path(), DEFAULT_EXTENSIONS).unwrap();
        assert_eq!(again.frames(), set.frames());
    }

    #[test]
    fn single_jpeg_frame_is_converted_to_gray() {
        let dir = tempfile::tempdir().unwrap();
        let rgb = image::RgbImage::from_pixel(640, 480, image::Rgb([200, 100, 50]));
        rgb.save(dir.path().join("only.JPG")).unwrap();
        let set = load_image_set(dir.path(), DEFAULT_EXTENSIONS).unwrap();
        assert_eq!(set.len(), 1);
        assert_eq!(set.frames()[0].dimensions(), (640, 480));
    }

    #[test]
    fn bt601_weights() {
        let rgb = image::RgbImage::from_pixel(1, 1, image::Rgb([255, 0, 0]));
        let gray = to_gray_bt601(&DynamicImage::ImageRgb8(rgb));
        // 0.299 * 255 = 76.245
        assert_eq!(gray.get_pixel(0, 0).0[0], 76);
    }

    #[test]
    fn undecodable_file_is_named() {
        let dir = tempfile::tempdir().unwrap();
        fs::write(dir.path().join("broken.png"), b"not a png").unwrap();
        let err = load_image_set(dir.path(), DEFAULT_EXTENSIONS).unwrap_err();
        assert!(err.to_string().contains("broken.png"), "{err}");
    }

    #[test]
    fn ground_truth_rows() {
        let gt = parse_ground_truth("query_index,ref_lo,ref_hi\n0,0,2\n1,1,3\n".as_bytes(), 2, 100).unwrap();
        assert_eq!(gt.get(0), Some(RefRange { lo: 0, hi: 2 }));
        assert_eq!(gt.get(1), Some(RefRange { lo: 1, hi: 3 }));
    }

    #[test]
    fn ground_truth_errors() {
        let err = parse_ground_truth("5,90,120\n".as_bytes(), 6, 100).unwrap_err();
        assert!(err.to_string().contains("out-of-range"), "{err}");

        let err = parse_ground_truth("0,0,0\n1,1,1\n2,2,2\n".as_bytes(), 4, 100).unwrap_err();
        assert!(err.to_string().contains("missing entry for query 3"), "{err}");

        let err = parse_ground_truth("0,5,2\n".as_bytes(), 1, 100).unwrap_err();
        assert!(err.to_string().contains("hi 2 < lo 5"), "{err}");

        let err = parse_ground_truth("0,0,1\n0,0,1\n".as_bytes(), 1, 100).unwrap_err();
        assert!(err.to_string().contains("duplicate"), "{err}");
    }

    #[test]
    fn aligned_examples() {
        let gt = aligned_ground_truth(100, 100, 0).unwrap();
        assert!(gt.entries().iter().enumerate().all(|(i, r)| r.lo == i && r.hi == i));

        let gt = aligned_ground_truth(100, 100, 2).unwrap();
        assert_eq!(gt.get(0), Some(RefRange { lo: 0, hi: 2 }));
        assert_eq!(gt.get(99), Some(RefRange { lo: 97, hi: 99 }));
        assert_eq!(gt.tolerance(), Some(2));

        assert!(aligned_ground_truth(5, 4, 1).is_err());
    }

    #[test]
    fn synthetic_noiseless_matches_references() {
        let data = generate_synthetic(4, 6, 0.0, 7).unwrap();
        for (q, r) in data.queries.descriptors().iter().zip(data.references.descriptors()) {
            assert_eq!(q.values(), r.values());
        }
    }

    #[test]
    fn synthetic_is_seeded() {
        let a = generate_synthetic(10, 16, 0.5, 42).unwrap();
        let b = generate_synthetic(10, 16, 0.5, 42).unwrap();
        let c = generate_synthetic(10, 16, 0.5, 43).unwrap();
        let bits = |d: &SyntheticDataset| -> Vec<u32> {
            d.queries
                .descriptors()
                .iter()
                .flat_map(|x| x.values().iter().map(|v| v.to_bits()))
                .collect()
        };
        assert_eq!(bits(&a), bits(&b));
        assert_ne!(bits(&a), bits(&c));
    }

    #[test]
    fn synthetic_rejects_small_dim() {
        assert!(generate_synthetic(10, 5, 0.1, 0).is_err());
    }

    proptest::proptest! {
        #[test]
        fn aligned_entries_stay_in_range(q in 1usize..60, extra in 0usize..20, t in 0usize..30) {
            let r = q + extra;
            let gt = aligned_ground_truth(q, r, t).unwrap();
            for (i, e) in gt.entries().iter().enumerate() {
                proptest::prop_assert!(e.lo <= e.hi && e.hi < r);
                proptest::prop_assert!(e.contains(i));
            }
        }
    }
}
