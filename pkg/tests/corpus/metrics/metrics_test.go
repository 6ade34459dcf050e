package metrics

import "testing"

func TestMean(t *testing.T) {
	if m, err := mean([]float64{1.5, 2.5, 5.0}); err != nil || m != 3.0 {
		t.Errorf("bad mean %v", m)
	}
	if _, err := mean(nil); err == nil {
		t.Errorf("empty mean must fail")
	}
}

func TestMinMax(t *testing.T) {
	lo, hi, err := minMax([]float64{4.0, -1.5, 2.25})
	if err != nil || lo != -1.5 || hi != 4.0 {
		t.Errorf("bad minmax %v %v", lo, hi)
	}
	if _, _, err := minMax([]float64{}); err == nil {
		t.Errorf("empty minmax must fail")
	}
}

func TestSpread(t *testing.T) {
	if v, err := variance([]float64{2.0, 4.0, 6.0}); err != nil || v != 8.0/3.0 {
		t.Errorf("bad variance %v", v)
	}
	if s, err := stddev([]float64{3.0, 3.0, 3.0}); err != nil || s != 0.0 {
		t.Errorf("bad stddev %v", s)
	}
	if _, err := stddev(nil); err == nil {
		t.Errorf("empty stddev must fail")
	}
}

func TestScaleAndClamp(t *testing.T) {
	out := scale([]float64{1.5, -2.0}, 2.0)
	if len(out) != 2 || out[0] != 3.0 || out[1] != -4.0 {
		t.Errorf("bad scale %v", out)
	}
	if scale(nil, 3.0) != nil {
		t.Errorf("nil scales to nil")
	}
	if clamp(5.0, 0.0, 2.5) != 2.5 {
		t.Errorf("bad upper clamp")
	}
	if clamp(-1.0, 0.0, 2.5) != 0.0 {
		t.Errorf("bad lower clamp")
	}
	if clamp(1.25, 0.0, 2.5) != 1.25 {
		t.Errorf("bad middle clamp")
	}
}

func TestMedian(t *testing.T) {
	if m, err := median([]float64{5.0, 1.0, 3.0}); err != nil || m != 3.0 {
		t.Errorf("bad odd median %v", m)
	}
	if m, err := median([]float64{4.0, 1.0, 3.0, 2.0}); err != nil || m != 2.5 {
		t.Errorf("bad even median %v", m)
	}
	if _, err := median(nil); err == nil {
		t.Errorf("empty median must fail")
	}
}

func TestBuckets(t *testing.T) {
	if bucketIndex(0.25, defaultBuckets) != 0 {
		t.Errorf("0.25 goes in bucket 0")
	}
	if bucketIndex(1.0, defaultBuckets) != 1 {
		t.Errorf("1.0 goes in bucket 1")
	}
	if bucketIndex(9.0, defaultBuckets) != 3 {
		t.Errorf("9.0 overflows to bucket 3")
	}
	counts := countBuckets([]float64{0.25, 1.0, 9.0, 0.125})
	if len(counts) != 4 || counts[0] != 2 || counts[1] != 1 || counts[3] != 1 {
		t.Errorf("bad counts %v", counts)
	}
}

func TestSeries(t *testing.T) {
	s := &Series{Label: "latency"}
	if s.Count() != 0 {
		t.Errorf("fresh series is empty")
	}
	if _, err := s.Summarize(); err == nil {
		t.Errorf("empty summarize must fail")
	}
	s.Add(1.5)
	s.Add(0.5)
	s.Add(4.0)
	if s.Count() != 3 {
		t.Errorf("bad count")
	}
	sum, err := s.Summarize()
	if err != nil || sum.Count != 3 || sum.Mean != 2.0 || sum.Min != 0.5 || sum.Max != 4.0 {
		t.Errorf("bad summary %+v", sum)
	}
	s.Reset()
	if s.Count() != 0 {
		t.Errorf("reset clears values")
	}
}
