package metrics

import (
	"errors"
	"math"
	"sort"
)

func mean(values []float64) (float64, error) {
	if len(values) == 0 {
		return 0, errors.New("empty series")
	}
	total := 0.0
	for _, v := range values {
		total += v
	}
	return total / float64(len(values)), nil
}

func minMax(values []float64) (float64, float64, error) {
	if len(values) == 0 {
		return 0, 0, errors.New("empty series")
	}
	lo := values[0]
	hi := values[0]
	for _, v := range values {
		if v < lo {
			lo = v
		}
		if v > hi {
			hi = v
		}
	}
	return lo, hi, nil
}

func variance(values []float64) (float64, error) {
	m, err := mean(values)
	if err != nil {
		return 0, err
	}
	total := 0.0
	for _, v := range values {
		d := v - m
		total += d * d
	}
	return total / float64(len(values)), nil
}

func stddev(values []float64) (float64, error) {
	v, err := variance(values)
	if err != nil {
		return 0, err
	}
	return math.Sqrt(v), nil
}

func scale(values []float64, factor float64) []float64 {
	if values == nil {
		return nil
	}
	out := []float64{}
	for _, v := range values {
		out = append(out, v*factor)
	}
	return out
}

func median(values []float64) (float64, error) {
	if len(values) == 0 {
		return 0, errors.New("empty series")
	}
	sorted := []float64{}
	for _, v := range values {
		sorted = append(sorted, v)
	}
	sort.Float64s(sorted)
	mid := len(sorted) / 2
	if len(sorted)%2 == 1 {
		return sorted[mid], nil
	}
	return (sorted[mid-1] + sorted[mid]) / 2.0, nil
}

func clamp(v float64, lo float64, hi float64) float64 {
	if v < lo {
		return lo
	}
	if v > hi {
		return hi
	}
	return v
}
