package metrics

type Series struct {
	Values []float64
	Label  string
}

type Summary struct {
	Count int
	Mean  float64
	Min   float64
	Max   float64
}

type Summarizer interface {
	Summarize() (Summary, error)
}

func (s *Series) Add(v float64) {
	s.Values = append(s.Values, v)
}

func (s *Series) Count() int {
	return len(s.Values)
}

func (s *Series) Reset() {
	s.Values = nil
}

func (s *Series) Summarize() (Summary, error) {
	m, err := mean(s.Values)
	if err != nil {
		return Summary{}, err
	}
	lo, hi, err := minMax(s.Values)
	if err != nil {
		return Summary{}, err
	}
	return Summary{Count: len(s.Values), Mean: m, Min: lo, Max: hi}, nil
}
